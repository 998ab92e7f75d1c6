"""Comparison learners."""

import numpy as np
import pytest

from app.services.baseline_service import BaselineError, baseline_service
from app.services.instance_service import instance_service
from app.services.oracle_service import oracle_service


@pytest.fixture
def thresholds16():
    return instance_service.gen_thresholds(16)


class TestDispatch:

    def test_unknown_kind(self, thresholds16, rng):
        model = oracle_service.make_realizable(thresholds16.hclass, thresholds16.marginal, 9)
        with pytest.raises(BaselineError, match='Unknown baseline'):
            baseline_service.run_baseline('oracle_peek', thresholds16, model, 10, rng)

    def test_negative_budget(self, thresholds16, rng):
        model = oracle_service.make_realizable(thresholds16.hclass, thresholds16.marginal, 9)
        with pytest.raises(BaselineError):
            baseline_service.run_baseline('passive_erm', thresholds16, model, -1, rng)

    def test_zero_budget_returns_first_hypothesis(self, thresholds16, rng):
        model = oracle_service.make_realizable(thresholds16.hclass, thresholds16.marginal, 9)
        for kind in ('passive_erm', 'greedy_split', 'uniform_disagreement'):
            result = baseline_service.run_baseline(kind, thresholds16, model, 0, rng)
            assert result.hypothesis == 0
            assert result.queries == 0
            assert result.flags == ('zero_budget',)
            assert result.flagged


class TestPassiveErm:

    def test_realizable_recovers_truth(self, thresholds10, rng):
        model = oracle_service.make_realizable(thresholds10.hclass, thresholds10.marginal, 4)
        result = baseline_service.run_baseline('passive_erm', thresholds10, model, 2000, rng)
        assert result.hypothesis == 4
        assert result.queries == 2000
        assert not result.flagged

    def test_same_seed_same_answer(self, thresholds10):
        model = oracle_service.make_iid_flip(thresholds10.hclass, thresholds10.marginal, 4, 0.3)
        first = baseline_service.run_baseline('passive_erm', thresholds10, model, 30, np.random.default_rng(1))
        second = baseline_service.run_baseline('passive_erm', thresholds10, model, 30, np.random.default_rng(1))
        assert first == second


class TestGreedySplit:

    def test_binary_search_on_thresholds(self, thresholds16, rng):
        for h_star in (0, 9, 16):
            model = oracle_service.make_realizable(thresholds16.hclass, thresholds16.marginal, h_star)
            result = baseline_service.run_baseline('greedy_split', thresholds16, model, 50, rng)
            assert result.hypothesis == h_star
            assert result.queries <= 5

    def test_budget_is_respected(self, thresholds16, rng):
        model = oracle_service.make_realizable(thresholds16.hclass, thresholds16.marginal, 9)
        result = baseline_service.run_baseline('greedy_split', thresholds16, model, 2, rng)
        assert result.queries == 2

    def test_noise_can_mislead(self, thresholds16):
        model = oracle_service.make_iid_flip(thresholds16.hclass, thresholds16.marginal, 9, 0.4)
        answers = {
            baseline_service.run_baseline('greedy_split', thresholds16, model, 50, np.random.default_rng(seed)).hypothesis
            for seed in range(30)
        }
        assert len(answers) > 1


class TestUniformDisagreement:

    def test_realizable_converges(self, thresholds16, rng):
        model = oracle_service.make_realizable(thresholds16.hclass, thresholds16.marginal, 9)
        result = baseline_service.run_baseline('uniform_disagreement', thresholds16, model, 1000, rng)
        assert result.hypothesis == 9
        assert 1 <= result.queries <= 16

    def test_unary_binary_is_cheap(self):
        instance = instance_service.gen_unary_binary(64)
        model = oracle_service.make_realizable(instance.hclass, instance.marginal, 37)
        queries = [
            baseline_service.run_baseline(
                'uniform_disagreement', instance, model, 1000, np.random.default_rng(seed),
            ).queries
            for seed in range(20)
        ]
        assert np.median(queries) <= 20
