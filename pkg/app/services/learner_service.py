"""
Learner Service - stage one of the competitive active learner

Each iteration:
1. lambda_i = softmax of the log-weights over the packing H'
2. Heavy-ball step: if a radius_detect ball carries > 80% of the capped
   posterior, add B(mu', radius_add) to S and mu' to C
3. Capped posterior lambda_bar = lambda/2 + lambda_{H'\\S}/2
4. Uncertainty r_bar(x) = minority-label mass of lambda_bar at x
5. Solve for the query distribution q*, sample x ~ q*, query y
6. Multiply the weight of every h with h(x) != y by e^-alpha

Stage one ends after the round budget (fixed mode), once the accumulated
objective reaches the stop threshold (adaptive mode), or as soon as S
covers all of H'. Stage two then runs the tournament over C.

All weights stay in log space: log w = log w0 - alpha * mistakes.
"""

import logging
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.special import softmax

from app.models.hypothesis import Instance, InstanceError, Marginal
from app.models.labels import LabelModel
from app.models.learner import (
    CLAIMED_BALL_WEIGHT,
    HEAVY_BALL_THRESHOLD,
    AlgorithmParams,
    LearnerState,
    ParamsError,
    QueryPlan,
    RunRecord,
    TraceRow,
)
from app.services.hypothesis_service import hypothesis_service
from app.services.oracle_service import oracle_service
from app.services.tournament_service import tournament_service


logger = logging.getLogger(__name__)


INVARIANT_TOLERANCE = 1e-9
OBJECTIVE_TOLERANCE = 1e-12


class InvariantViolation(Exception):
    """A checked learner invariant failed during an instrumented run."""
    pass


class DegenerateCapError(Exception):
    """Capped posterior requested while S covers every packed hypothesis."""
    pass


class LearnerService:
    """
    Usage:
        from app.services.learner_service import learner_service

        record = learner_service.run(instance, params, model, rng)
        print(record.final_hypothesis, record.total_queries)
    """

    # ------------------------------------------------------------------
    # Posterior
    # ------------------------------------------------------------------

    def posterior(self, state: LearnerState) -> np.ndarray:
        """lambda(h) = w(h) / sum w over the packing."""
        lam = softmax(state.log_weights)
        assert np.isfinite(lam).all() and lam.sum() > 0, "posterior lost all mass"
        return lam

    def posterior_within(self, log_weights: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Posterior restricted to `mask`, zero elsewhere."""
        out = np.zeros(log_weights.size)
        if mask.any():
            out[mask] = softmax(log_weights[mask])
        return out

    def capped(
        self,
        lam: np.ndarray,
        capped_mask: np.ndarray,
        log_weights: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """
        lambda_bar = lambda/2 + lambda_{H'\\S}/2, which halves the mass
        inside S and rescales the rest.

        When log_weights are given the restricted posterior is taken from
        them directly, so it stays accurate when Pr[S] rounds to 1.

        Raises:
            DegenerateCapError: If S covers every hypothesis or H'\\S has no mass
        """
        capped_mask = np.asarray(capped_mask, dtype=bool)
        if not capped_mask.any():
            return np.array(lam, dtype=np.float64)

        free = ~capped_mask
        if not free.any():
            raise DegenerateCapError("S covers the whole packing")

        if log_weights is not None:
            rest = self.posterior_within(log_weights, free)
        else:
            total = lam[free].sum()
            if total <= 0:
                raise DegenerateCapError("Posterior outside S has no mass")
            rest = np.where(free, lam, 0.0) / total

        return 0.5 * lam + 0.5 * rest

    def uncertainty(self, lam_bar: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """
        r_bar(x) = min(Pr[h(x) = 1], Pr[h(x) = 0]) under lambda_bar.

        Both sides are summed separately, so a unanimous point gives exactly 0.
        """
        ones = lam_bar @ labels
        zeros = lam_bar @ (1 - labels)
        return np.clip(np.minimum(ones, zeros), 0.0, 0.5)

    # ------------------------------------------------------------------
    # Query distribution
    # ------------------------------------------------------------------

    def solve_query_distribution(self, r_bar, marginal: Marginal, kappa: float) -> QueryPlan:
        """
        Exact maximizer of E_q[r_bar] - kappa * max_x q(x)/D_X(x).

        Candidates are D_X conditioned on the top-k points by r_bar, with
        equal r_bar values entering as one block. Best-candidate ties go to
        the larger support. kappa = 0 puts all mass on the lowest-index
        argmax.

        Raises:
            ParamsError: If kappa < 0
            InstanceError: If r_bar does not match the marginal
        """
        if kappa < 0:
            raise ParamsError(f"kappa must be >= 0, got {kappa}")

        r = np.asarray(r_bar, dtype=np.float64)
        masses = marginal.masses
        if r.shape != masses.shape:
            raise InstanceError(f"Uncertainty vector has shape {r.shape}, marginal has {marginal.n} points")

        points = np.flatnonzero(masses > 0)

        if kappa == 0:
            best = int(points[np.argmax(r[points])])
            return QueryPlan(
                support=(best,),
                masses=(1.0,),
                threshold=float(r[best]),
                objective=float(r[best]),
                support_mass=float(masses[best]),
            )

        order = points[np.argsort(-r[points], kind='stable')]
        ranked = r[order]
        cum_mass = np.cumsum(masses[order])
        cum_gain = np.cumsum(masses[order] * ranked)

        block_ends = np.flatnonzero(np.append(ranked[1:] != ranked[:-1], True))
        objectives = (cum_gain[block_ends] - kappa) / cum_mass[block_ends]

        # last maximum = largest support among equally good candidates
        chosen = block_ends.size - 1 - int(np.argmax(objectives[::-1]))
        k = int(block_ends[chosen])

        support = np.sort(order[:k + 1])
        support_mass = float(masses[support].sum())
        q = masses[support] / support_mass
        objective = float(q @ r[support] - kappa / support_mass)

        degenerate = not np.any(r[points] > 0)
        if degenerate:
            logger.warning("Every point has zero uncertainty; returning the full-support plan")

        return QueryPlan(
            support=tuple(int(x) for x in support),
            masses=tuple(float(m) for m in q),
            threshold=float(ranked[k]),
            objective=objective,
            support_mass=support_mass,
            degenerate=degenerate,
        )

    def plan_objective(self, plan: QueryPlan, r_bar, marginal: Marginal, kappa: float) -> float:
        """Recompute E_q[r_bar] - kappa * max q/D_X from the plan's fields."""
        r = np.asarray(r_bar, dtype=np.float64)
        support = list(plan.support)
        q = np.asarray(plan.masses)
        ratio = float(np.max(q / marginal.masses[support]))
        return float(q @ r[support] - kappa * ratio)

    def sample_query(self, plan: QueryPlan, rng: np.random.Generator) -> int:
        """Inverse-CDF draw from the plan's support."""
        cdf = np.cumsum(plan.masses)
        pick = int(np.searchsorted(cdf, rng.random() * cdf[-1], side='right'))
        return plan.support[min(pick, len(plan.support) - 1)]

    # ------------------------------------------------------------------
    # S / C expansion and weights
    # ------------------------------------------------------------------

    def heavy_ball_step(
        self,
        state: LearnerState,
        lam: np.ndarray,
        distances: np.ndarray,
        radius_detect: float,
        radius_add: float,
        check: bool = False,
    ) -> Optional[Dict[str, Any]]:
        """
        Add B(mu', radius_add) to S when some radius_detect ball holds more
        than 80% of the capped posterior. mu' is the heaviest radius_detect
        ball under the uncapped posterior. At most one ball per call.

        Returns:
            The addition event (packing positions), or None

        Raises:
            DegenerateCapError: If S already covers the packing
            InvariantViolation: With check=True, if the added ball is light
                or a heavy ball survives the addition
        """
        lam_bar = self.capped(lam, state.capped, state.log_weights)
        detected = hypothesis_service.ball_masses(distances, lam_bar, radius_detect)
        if detected.max() <= HEAVY_BALL_THRESHOLD:
            return None

        uncapped = hypothesis_service.ball_masses(distances, lam, radius_detect)
        center = int(np.argmax(uncapped))

        if check and uncapped[center] < CLAIMED_BALL_WEIGHT - INVARIANT_TOLERANCE:
            message = (
                f"Iteration {state.iteration}: added ball around position {center} has "
                f"uncapped mass {uncapped[center]:.12f} < {CLAIMED_BALL_WEIGHT}"
            )
            logger.error(message)
            raise InvariantViolation(message)

        ball = distances[center] <= radius_add
        added = np.flatnonzero(ball & ~state.capped)
        state.capped |= ball
        state.centers.append(center)

        event = {
            'iteration': state.iteration,
            'center': center,
            'added': tuple(int(h) for h in added),
            'detected_mass': float(detected.max()),
            'claimed_mass': float(uncapped[center]),
        }
        state.events.append(event)
        logger.debug(f"Heavy ball at iteration {state.iteration}: center {center}, +{added.size} in S")

        if check and not state.covers_everything():
            after = hypothesis_service.ball_masses(
                distances, self.capped(lam, state.capped, state.log_weights), radius_detect,
            )
            if after.max() > HEAVY_BALL_THRESHOLD + INVARIANT_TOLERANCE:
                message = (
                    f"Iteration {state.iteration}: capped ball mass {after.max():.12f} "
                    f"still exceeds {HEAVY_BALL_THRESHOLD} after adding a ball"
                )
                logger.error(message)
                raise InvariantViolation(message)

        return event

    def update_weights(self, state: LearnerState, labels: np.ndarray, x: int, y: int, alpha: float) -> LearnerState:
        """w(h) *= e^-alpha for every h with h(x) != y."""
        wrong = labels[:, x] != y
        state.mistakes += wrong
        state.log_weights = state.initial_log_weights - alpha * state.mistakes
        return state

    # ------------------------------------------------------------------
    # Instrumentation
    # ------------------------------------------------------------------

    def _check_transcript(self, state: LearnerState, labels: np.ndarray, xs: List[int], ys: List[int], alpha: float):
        if xs:
            mistakes = (labels[:, xs] != np.asarray(ys)).sum(axis=1)
        else:
            mistakes = np.zeros(state.n_packed, dtype=np.int64)

        expected = state.initial_log_weights - alpha * mistakes
        gap = float(np.max(np.abs(expected - state.log_weights)))
        if gap > INVARIANT_TOLERANCE:
            message = f"Iteration {state.iteration}: weights drift {gap:.3e} from the transcript"
            logger.error(message)
            raise InvariantViolation(message)

    def _check_plan(self, plan: QueryPlan, r_bar, marginal: Marginal, kappa: float, iteration: int):
        recomputed = self.plan_objective(plan, r_bar, marginal, kappa)
        if abs(recomputed - plan.objective) > OBJECTIVE_TOLERANCE:
            message = f"Iteration {iteration}: plan objective {plan.objective} != recomputed {recomputed}"
            logger.error(message)
            raise InvariantViolation(message)

    # ------------------------------------------------------------------
    # Full run
    # ------------------------------------------------------------------

    def run(
        self,
        instance: Instance,
        params: AlgorithmParams,
        model: LabelModel,
        rng: np.random.Generator,
        initial_weights=None,
        check_invariants: bool = False,
    ) -> RunRecord:
        """
        Stage one followed by the stage-two tournament.

        Args:
            instance: Hypothesis class and marginal
            params: Algorithm parameters
            model: Label oracle
            rng: Random stream (owned by this run)
            initial_weights: Optional positive weights over the packing
            check_invariants: Assert the learner invariants every iteration

        Returns:
            RunRecord with class indices throughout

        Raises:
            InvariantViolation: Only with check_invariants=True
        """
        hclass, marginal = instance.hclass, instance.marginal

        packing = hypothesis_service.greedy_maximal_packing(hclass, marginal, 2.0 * params.eta)
        members = np.asarray(packing.members)
        distances = hypothesis_service.packing_distances(instance, packing)
        labels = hclass.labels[members]

        state = LearnerState.start(len(packing), initial_weights)
        n_packed = state.n_packed

        if params.mode == 'fixed_rounds':
            rounds = params.round_budget(n_packed)
            threshold = None
        else:
            rounds = params.max_rounds
            threshold = params.stop_threshold(n_packed)

        logger.info(
            f"Run on {instance.name or 'instance'}: |X|={hclass.domain_size} |H|={hclass.n_hypotheses} "
            f"|H'|={n_packed} mode={params.mode} rounds<={rounds}"
        )

        trace: List[TraceRow] = []
        flags: List[str] = []
        xs: List[int] = []
        ys: List[int] = []
        stop_reason = 'round_budget' if threshold is None else 'max_rounds'

        for i in range(1, rounds + 1):
            state.iteration = i
            lam = self.posterior(state)
            before = state.capped.copy()

            try:
                event = self.heavy_ball_step(
                    state, lam, distances, params.radius_detect, params.radius_add, check=check_invariants,
                )
                if state.covers_everything():
                    stop_reason = 'covered'
                    break
                lam_bar = self.capped(lam, state.capped, state.log_weights)
            except DegenerateCapError:
                stop_reason = 'covered'
                break

            if check_invariants and np.any(before & ~state.capped):
                raise InvariantViolation(f"Iteration {i}: S shrank")

            r_bar = self.uncertainty(lam_bar, labels)
            plan = self.solve_query_distribution(r_bar, marginal, params.kappa)
            if check_invariants:
                self._check_plan(plan, r_bar, marginal, params.kappa, i)
            if plan.degenerate and 'degenerate_plan' not in flags:
                flags.append('degenerate_plan')

            x = self.sample_query(plan, rng)
            y = oracle_service.sample_label(model, x, rng)
            self.update_weights(state, labels, x, y, params.alpha)
            state.tau_sum += plan.objective
            xs.append(x)
            ys.append(y)

            if check_invariants:
                self._check_transcript(state, labels, xs, ys, params.alpha)

            trace.append(TraceRow(
                iteration=i,
                x=int(x),
                y=int(y),
                tau=plan.objective,
                s_size=int(state.capped.sum()),
                c_size=len(state.centers),
                heavy=event is not None,
                center=int(members[event['center']]) if event else -1,
                added=tuple(int(members[h]) for h in event['added']) if event else (),
                support_size=len(plan.support),
                degenerate_plan=plan.degenerate,
            ))
            logger.debug(f"Iteration {i}: x={x} y={y} tau={plan.objective:.6f} |S|={state.capped.sum()}")

            if threshold is not None and state.tau_sum >= threshold:
                stop_reason = 'threshold'
                break

        if stop_reason == 'max_rounds':
            flags.append('max_rounds')
            logger.warning(f"Adaptive stop never fired within {rounds} rounds")

        centers = [int(members[c]) for c in state.centers]

        if centers:
            result = tournament_service.tournament(
                hclass, marginal, model, centers, params.eta_tilde, params.delta, rng,
                duel_constant=params.duel_constant,
            )
            final, duels, stage2 = result.winner, list(result.duels), result.queries
        else:
            final = int(members[int(np.argmax(state.log_weights))])
            duels, stage2 = [], 0
            flags.append('empty_centers')
            logger.warning(f"No heavy ball found within {len(trace)} queries; returning the posterior mode h{final}")

        logger.info(
            f"Run finished ({stop_reason}): stage one {len(trace)} queries, stage two {stage2}, "
            f"|C|={len(centers)}, h_hat=h{final}"
        )

        return RunRecord(
            final_hypothesis=final,
            stage1_queries=len(trace),
            stage2_queries=stage2,
            centers=centers,
            packing=packing.members,
            trace=trace,
            duels=duels,
            params=params,
            initial_log_weights=state.initial_log_weights.copy(),
            tau_sum=state.tau_sum,
            stop_reason=stop_reason,
            flags=flags,
        )


# Singleton instance
learner_service = LearnerService()


if __name__ == "__main__":
    """
    Test learner service.

    Usage:
        python -m app.services.learner_service
    """

    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    from app.services.instance_service import instance_service

    print("\n" + "#"*60)
    print("# LEARNER SERVICE TEST SUITE")
    print("#"*60)

    results = []

    # =================================================================
    # TEST 1: Query distribution solver
    # =================================================================
    print("\n" + "="*60)
    print("TEST 1: Solver on r = (0.4, 0.3, 0), kappa = 0.05")
    print("="*60)

    try:
        plan = learner_service.solve_query_distribution(np.array([0.4, 0.3, 0.0]), Marginal.uniform(3), 0.05)
        print(f"Support: {list(plan.support)}  objective: {plan.objective:.6f}")
        if plan.support == (0, 1) and abs(sum(plan.masses) - 1.0) < 1e-9:
            print("✅ Solver PASSED")
            results.append(("Solver", True))
        else:
            print("❌ Expected support [0, 1]")
            results.append(("Solver", False))
    except Exception as e:
        print(f"❌ Error: {e}")
        results.append(("Solver", False))

    # =================================================================
    # TEST 2: Realizable run, fixed rounds
    # =================================================================
    instance = instance_service.gen_thresholds(16)
    model = oracle_service.make_realizable(instance.hclass, instance.marginal, 5)

    print("\n" + "="*60)
    print("TEST 2: Realizable run on thresholds-16 (fixed rounds)")
    print("="*60)

    try:
        params = AlgorithmParams(eta=0.0, epsilon=0.05, delta=0.1, c4=3.0, c5=0.25, practical=True, m_hat=2)
        record = learner_service.run(instance, params, model, np.random.default_rng(3), check_invariants=True)
        print(f"Final: t={record.final_hypothesis}  queries: {record.total_queries}  centers: {record.centers}")
        if record.final_hypothesis == 5:
            print("✅ Fixed-rounds run PASSED")
            results.append(("Run (fixed rounds)", True))
        else:
            print("❌ Learner missed t=5")
            results.append(("Run (fixed rounds)", False))
    except Exception as e:
        print(f"❌ Error: {e}")
        results.append(("Run (fixed rounds)", False))

    # =================================================================
    # TEST 3: Adaptive stop
    # =================================================================
    print("\n" + "="*60)
    print("TEST 3: Adaptive stop on thresholds-16")
    print("="*60)

    try:
        params = AlgorithmParams(eta=0.0, epsilon=0.05, delta=0.1, c4=3.0, c5=0.25, practical=True, mode='adaptive')
        record = learner_service.run(instance, params, model, np.random.default_rng(3), check_invariants=True)
        print(f"Stop: {record.stop_reason} after {record.stage1_queries} queries, sum tau = {record.tau_sum:.3f}")
        print(f"Final: t={record.final_hypothesis}")
        if record.stop_reason != 'max_rounds':
            print("✅ Adaptive stop PASSED")
            results.append(("Adaptive stop", True))
        else:
            print("❌ Stop rule never fired")
            results.append(("Adaptive stop", False))
    except Exception as e:
        print(f"❌ Error: {e}")
        results.append(("Adaptive stop", False))

    # =================================================================
    # SUMMARY
    # =================================================================
    print("\n" + "="*60)
    print("TEST SUMMARY")
    print("="*60)

    passed = sum(1 for _, result in results if result)
    total = len(results)

    for test_name, result in results:
        status = "✅ PASS" if result else "❌ FAIL"
        print(f"{status} - {test_name}")

    print("="*60)
    print(f"Results: {passed}/{total} tests passed")
    print("="*60)

    exit(0 if passed == total else 1)
