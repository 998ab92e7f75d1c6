"""Analysis oracles: m*, expected potential change, traces, solver cross-check."""

import math

import numpy as np
import pytest
from scipy.special import logsumexp

from app.models.hypothesis import HypothesisClass, InstanceError, Marginal
from app.models.learner import QueryPlan, RunRecord, TraceRow
from app.services.analysis_service import analysis_service
from app.services.instance_service import FIGURE1_WEIGHTS, instance_service
from app.services.learner_service import learner_service
from app.services.oracle_service import oracle_service


def _point_plan(x: int) -> QueryPlan:
    return QueryPlan(support=(x,), masses=(1.0,), threshold=0.0, objective=0.0, support_mass=1.0)


def _direct_expectation(lam, within, t, plan, p, labels, alpha):
    """Enumerate (x, y) and apply the multiplicative update by hand."""
    log_lam = np.log(np.where(within, lam, 0.0) + 1e-300)
    old = log_lam[t] - logsumexp(log_lam[within])
    total = 0.0
    for x, qx in zip(plan.support, plan.masses):
        for y, prob in ((labels[t, x], 1.0 - p[x]), (1 - labels[t, x], p[x])):
            log_next = log_lam - alpha * (labels[:, x] != y)
            new = log_next[t] - logsumexp(log_next[within])
            total += qx * prob * (new - old)
    return total


def _random_case(rng, n_hyp=5, n_points=6):
    lam = rng.dirichlet(np.ones(n_hyp))
    labels = (rng.random((n_hyp, n_points)) < 0.5).astype(np.uint8)
    t = int(rng.integers(n_hyp))
    within = rng.random(n_hyp) < 0.6
    within[t] = True
    marginal = Marginal(rng.dirichlet(np.ones(n_points)))
    plan = learner_service.solve_query_distribution(rng.random(n_points) * 0.5, marginal, 0.05)
    p = rng.random(n_points) * 0.4
    return lam, labels, t, within, plan, p


class TestMStar:

    def test_thresholds(self):
        assert analysis_service.mstar_realizable_exact(instance_service.gen_thresholds(1).hclass) == 1
        assert analysis_service.mstar_realizable_exact(instance_service.gen_thresholds(3).hclass) == 2
        assert analysis_service.mstar_realizable_exact(instance_service.gen_thresholds(7).hclass) == 3

    def test_single_hypothesis(self):
        assert analysis_service.mstar_realizable_exact(HypothesisClass(np.array([[0, 1, 1]]))) == 0

    def test_identical_rows_need_no_queries(self):
        assert analysis_service.mstar_realizable_exact(HypothesisClass(np.array([[0, 1], [0, 1]]))) == 0

    def test_unary_binary(self):
        assert analysis_service.mstar_realizable_exact(instance_service.gen_unary_binary(4).hclass) == 2

    def test_zero_mass_points_are_not_queried(self):
        instance = instance_service.gen_thresholds(7)
        marginal = Marginal(np.array([0.0, 0.0, 0.0, 0.0, 1 / 3, 1 / 3, 1 / 3]))
        assert analysis_service.mstar_realizable_exact(instance.hclass, marginal) == 2

    def test_size_guard(self):
        with pytest.raises(InstanceError):
            analysis_service.mstar_realizable_exact(instance_service.gen_thresholds(12).hclass)
        with pytest.raises(InstanceError):
            analysis_service.mstar_realizable_exact(HypothesisClass(np.zeros((2, 13), dtype=np.uint8)))


class TestExpectedDelta:

    def test_single_point_correct_label(self):
        labels = np.array([[1], [0]], dtype=np.uint8)
        value = analysis_service.expected_delta_exact(
            [0.5, 0.5], None, 0, _point_plan(0), np.array([0.0]), labels, 0.2,
        )
        assert value == pytest.approx(-math.log(1 - (1 - math.exp(-0.2)) * 0.5))
        assert value == pytest.approx(0.0950, abs=1e-4)

    def test_single_point_wrong_label(self):
        labels = np.array([[1], [0]], dtype=np.uint8)
        value = analysis_service.expected_delta_exact(
            [0.5, 0.5], None, 0, _point_plan(0), np.array([1.0]), labels, 0.2,
        )
        assert value == pytest.approx(-math.log(1 + (math.exp(0.2) - 1) * 0.5))

    def test_matches_direct_enumeration(self, rng):
        for _ in range(50):
            lam, labels, t, within, plan, p = _random_case(rng)
            exact = analysis_service.expected_delta_exact(lam, within, t, plan, p, labels, 0.2)
            assert exact == pytest.approx(_direct_expectation(lam, within, t, plan, p, labels, 0.2), abs=1e-12)

    def test_unanimous_support_gives_zero(self):
        labels = np.array([[1, 0], [1, 1]], dtype=np.uint8)
        value = analysis_service.expected_delta_exact(
            [0.3, 0.7], None, 0, _point_plan(0), np.array([0.2, 0.2]), labels, 0.2,
        )
        assert value == 0.0

    def test_restriction_must_contain_h_star(self):
        labels = np.array([[1], [0]], dtype=np.uint8)
        with pytest.raises(InstanceError):
            analysis_service.disagreement_mass([0.5, 0.5], np.array([False, True]), 0, labels)


class TestGrowth:

    def test_bound_holds_for_any_noise(self, rng):
        for alpha in (0.05, 0.1, 0.2):
            for _ in range(50):
                lam, labels, t, within, plan, p = _random_case(rng)
                exact = analysis_service.expected_delta_exact(lam, within, t, plan, p, labels, alpha)
                bound = analysis_service.growth_lower_bound(lam, within, t, plan, p, labels, alpha)
                assert exact >= bound - 1e-12

    def test_positive_part(self, rng):
        for _ in range(50):
            lam, labels, t, within, plan, p = _random_case(rng)
            positive = analysis_service.expected_positive_part_exact(lam, within, t, plan, p, labels, 0.2)
            r_tilde = analysis_service.disagreement_mass(lam, within, t, labels)
            cap = 0.2 * float(np.asarray(plan.masses) @ r_tilde[list(plan.support)])
            assert 0.0 <= positive <= cap + 1e-12

            noiseless = analysis_service.expected_delta_exact(lam, within, t, plan, np.zeros_like(p), labels, 0.2)
            assert analysis_service.expected_positive_part_exact(
                lam, within, t, plan, np.zeros_like(p), labels, 0.2,
            ) == pytest.approx(noiseless)


class TestMonteCarlo:

    def test_agrees_with_exact(self, rng):
        outside = 0
        for _ in range(20):
            lam, labels, t, within, plan, p = _random_case(rng)
            p1 = np.where(labels[t] == 1, 1.0 - p, p)
            model = oracle_service.make_explicit_table(Marginal.uniform(labels.shape[1]), p1)

            exact = analysis_service.expected_delta_exact(lam, within, t, plan, p, labels, 0.2)
            mean, stderr = analysis_service.monte_carlo_delta(
                lam, within, t, plan, model, labels, 0.2, 4000, rng,
            )
            if abs(mean - exact) > 3 * stderr + 1e-12:
                outside += 1
        assert outside <= 1

    def test_same_seed_same_estimate(self):
        labels = np.array([[1, 0], [0, 0]], dtype=np.uint8)
        model = oracle_service.make_explicit_table(Marginal.uniform(2), [0.8, 0.1])
        plan = QueryPlan(support=(0, 1), masses=(0.5, 0.5), threshold=0.0, objective=0.0, support_mass=1.0)
        first = analysis_service.monte_carlo_delta(
            [0.5, 0.5], None, 0, plan, model, labels, 0.2, 500, np.random.default_rng(3), batch_size=64,
        )
        second = analysis_service.monte_carlo_delta(
            [0.5, 0.5], None, 0, plan, model, labels, 0.2, 500, np.random.default_rng(3), batch_size=64,
        )
        assert first == second


def _manual_record(params, rows):
    return RunRecord(
        final_hypothesis=0,
        stage1_queries=len(rows),
        stage2_queries=0,
        centers=[],
        packing=(0, 1),
        trace=rows,
        duels=[],
        params=params,
        initial_log_weights=np.zeros(2),
        tau_sum=0.0,
        stop_reason='round_budget',
    )


class TestPotentialTrace:

    def test_hand_built_transcript(self, three_point, practical_params):
        rows = [
            TraceRow(iteration=1, x=1, y=1, tau=0.0, s_size=0, c_size=0, heavy=False),
            TraceRow(iteration=2, x=0, y=1, tau=0.0, s_size=0, c_size=0, heavy=False),
            TraceRow(iteration=3, x=2, y=0, tau=0.0, s_size=1, c_size=1, heavy=True, center=0, added=(0,)),
        ]
        trace = analysis_service.potential_trace(three_point, _manual_record(practical_params(), rows), 0)

        assert trace.phi0 == pytest.approx(2 * math.log(0.5))
        assert trace.delta[0] == 0.0
        assert trace.delta[1] == pytest.approx(2 * math.log(2 / (1 + math.exp(-0.2))))
        assert trace.delta[2] == 0.0
        assert trace.in_s == (False, False, True)
        assert trace.phi[2] == 0.0
        assert trace.psi == pytest.approx((0.0, 0.0, trace.delta[1], trace.delta[1]))
        assert trace.posterior[:2] == pytest.approx((0.5, 0.5))
        assert trace.final_posterior == pytest.approx(1 / (1 + math.exp(-0.4)))
        assert not trace.substituted

    def test_realizable_run(self, practical_params, rng):
        instance = instance_service.gen_thresholds(16)
        model = oracle_service.make_realizable(instance.hclass, instance.marginal, 9)
        record = learner_service.run(instance, practical_params(m_hat=2), model, rng)
        trace = analysis_service.potential_trace(instance, record, 9)

        assert trace.phi0 == pytest.approx(2 * math.log(1 / 17))
        assert trace.psi[0] == 0.0
        assert len(trace.psi) == len(trace.delta) + 1 == record.stage1_queries + 1
        assert trace.max_abs_delta <= 2 * 0.2
        assert trace.posterior_path[0] == pytest.approx(1 / 17)
        assert trace.final_posterior > 0.8
        assert any(trace.in_s)

    def test_noisy_runs_keep_steps_bounded(self, practical_params):
        instance = instance_service.gen_thresholds(16)
        for seed in range(5):
            model = oracle_service.make_iid_flip(instance.hclass, instance.marginal, 4, 0.1)
            record = learner_service.run(
                instance, practical_params(eta=0.02, m_hat=1), model, np.random.default_rng(seed),
            )
            trace = analysis_service.potential_trace(instance, record, 4)
            assert trace.max_abs_delta <= 2 * 0.2 + 1e-12

    def test_substituted_member(self, thresholds10, practical_params, rng):
        model = oracle_service.make_realizable(thresholds10.hclass, thresholds10.marginal, 3)
        record = learner_service.run(thresholds10, practical_params(eta=0.05, m_hat=1), model, rng)
        assert record.packing == (0, 2, 4, 6, 8, 10)

        assert analysis_service.tracked_member(thresholds10, record, 3) == (2, True)
        trace = analysis_service.potential_trace(thresholds10, record, 3)
        assert trace.tracked == 2
        assert trace.substituted


class TestReplay:

    def test_plans_match_the_run(self, practical_params, rng):
        instance = instance_service.gen_thresholds(16)
        model = oracle_service.make_iid_flip(instance.hclass, instance.marginal, 11, 0.05)
        record = learner_service.run(instance, practical_params(eta=0.02, m_hat=1), model, rng)

        steps = list(analysis_service.replay(instance, record))
        assert len(steps) == len(record.trace)
        for step, row in zip(steps, record.trace):
            assert step.plan.objective == row.tau
            assert len(step.plan.support) == row.support_size
            assert int(step.capped.sum()) == row.s_size
            assert (step.x, step.y) == (row.x, row.y)

    def test_initial_weights_are_replayed(self, figure1, practical_params, rng):
        instance = figure1.instance
        model = oracle_service.make_figure1_adversary(instance.hclass, instance.marginal, 2, 1 / 32)
        params = practical_params(eta=0.01, epsilon=0.05, m_hat=1)
        record = learner_service.run(instance, params, model, rng, initial_weights=FIGURE1_WEIGHTS)

        first = next(analysis_service.replay(instance, record))
        np.testing.assert_allclose(first.lam, np.asarray(FIGURE1_WEIGHTS) / np.sum(FIGURE1_WEIGHTS))


class TestGrowthCheck:

    def test_rows_respect_bounds(self, practical_params, rng):
        instance = instance_service.gen_thresholds(16)
        model = oracle_service.make_iid_flip(instance.hclass, instance.marginal, 6, 0.02)
        record = learner_service.run(instance, practical_params(eta=0.02, m_hat=1), model, rng)
        frame = analysis_service.growth_check(instance, record, model, 6)

        assert list(frame.columns) == ['iteration', 'region', 'expected', 'bound', 'positive_part', 'positive_cap']
        assert set(frame['region']) == {'all', 'uncapped'}
        assert (frame['expected'] >= frame['bound'] - 1e-12).all()
        assert (frame['positive_part'] <= frame['positive_cap'] + 1e-12).all()


class TestSolverCrosscheck:

    def test_solver_is_never_beaten(self, rng):
        for _ in range(20):
            marginal = Marginal(rng.dirichlet(np.ones(6)))
            margin = analysis_service.solver_crosscheck(rng.random(6) * 0.5, marginal, 0.05, 500, rng)
            assert margin >= -1e-12

    def test_size_guard(self, rng):
        with pytest.raises(InstanceError):
            analysis_service.solver_crosscheck(np.zeros(9), Marginal.uniform(9), 0.05, 10, rng)
