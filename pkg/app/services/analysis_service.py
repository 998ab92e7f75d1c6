"""
Analysis Oracle Service

Brute-force and closed-form checks for the learner:
- Exact realizable query complexity m* by game-tree search
- Exact expected change of log lambda_T(h*) for one query (T contains h*)
- Expected positive part of that change, and a Monte Carlo estimate
- Potential traces phi / delta / psi replayed from a run record
- Random-distribution cross-check of the query-distribution solver

Replays rebuild every iteration of a RunRecord from its transcript with
the same arithmetic as the learner, so plans match bit for bit.
"""

import logging
import math
from functools import lru_cache
from typing import Iterator, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from app.models.hypothesis import HypothesisClass, Instance, InstanceError, Marginal
from app.models.labels import LabelModel
from app.models.learner import LearnerState, PotentialTrace, QueryPlan, ReplayStep, RunRecord
from app.services.hypothesis_service import hypothesis_service
from app.services.learner_service import InvariantViolation, learner_service
from app.services.oracle_service import oracle_service


logger = logging.getLogger(__name__)


MAX_GAME_TREE_SIZE = 12
MAX_CROSSCHECK_POINTS = 8
GROWTH_FACTOR = 0.9
NOISE_FACTOR = 2.3


class AnalysisService:
    """
    Usage:
        from app.services.analysis_service import analysis_service

        m_star = analysis_service.mstar_realizable_exact(hclass, marginal)
        trace = analysis_service.potential_trace(instance, record, h_star)
    """

    # ------------------------------------------------------------------
    # m* oracle
    # ------------------------------------------------------------------

    def mstar_realizable_exact(self, hclass: HypothesisClass, marginal: Optional[Marginal] = None) -> int:
        """
        Optimal worst-case number of label queries that isolates the true
        hypothesis, over every adaptive strategy (eta = epsilon = delta = 0).

        Hypotheses with identical rows count as identified together.
        Zero-mass points are never queried.

        Raises:
            InstanceError: If |H| or |X| exceeds 12
        """
        if hclass.n_hypotheses > MAX_GAME_TREE_SIZE or hclass.domain_size > MAX_GAME_TREE_SIZE:
            raise InstanceError(
                f"Game-tree search supports |H|, |X| <= {MAX_GAME_TREE_SIZE}, "
                f"got |H|={hclass.n_hypotheses} |X|={hclass.domain_size}"
            )

        points = range(hclass.domain_size)
        if marginal is not None:
            points = np.flatnonzero(marginal.masses > 0)

        ones = [
            sum(1 << h for h in range(hclass.n_hypotheses) if hclass.labels[h, x])
            for x in points
        ]

        @lru_cache(maxsize=None)
        def depth(alive: int) -> int:
            best = None
            for column in ones:
                yes, no = alive & column, alive & ~column
                if not yes or not no:
                    continue
                value = 1 + max(depth(yes), depth(no))
                if best is None or value < best:
                    best = value
            return 0 if best is None else best

        return depth((1 << hclass.n_hypotheses) - 1)

    # ------------------------------------------------------------------
    # Expected potential change
    # ------------------------------------------------------------------

    def _restricted(self, lam: np.ndarray, within: Optional[np.ndarray], h_star: int) -> np.ndarray:
        lam = np.asarray(lam, dtype=np.float64)
        mask = np.ones(lam.size, dtype=bool) if within is None else np.asarray(within, dtype=bool)
        if not mask[h_star]:
            raise InstanceError(f"Restriction set does not contain h* (position {h_star})")

        lam_t = np.where(mask, lam, 0.0)
        lam_t = lam_t / lam_t.sum()
        assert lam_t[h_star] > 0, "lambda_T(h*) = 0: log-ratio undefined"
        return lam_t

    def disagreement_mass(self, lam, within, h_star: int, labels: np.ndarray) -> np.ndarray:
        """r_tilde(x) = Pr_{h ~ lambda_T}[h(x) != h*(x)]."""
        lam_t = self._restricted(lam, within, h_star)
        return lam_t @ (labels != labels[h_star])

    def _log_terms(self, r_tilde: np.ndarray, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
        up = -np.log1p(-(1.0 - math.exp(-alpha)) * r_tilde)
        down = -np.log1p((math.exp(alpha) - 1.0) * r_tilde)
        return up, down

    def expected_delta_exact(
        self,
        lam,
        within,
        h_star: int,
        plan: QueryPlan,
        p: np.ndarray,
        labels: np.ndarray,
        alpha: float,
    ) -> float:
        """
        E_{x~q} E_{y|x} [log lambda_{i+1,T}(h*) - log lambda_{i,T}(h*)].

        A correct label multiplies the T-normalizer by 1 - (1 - e^-a) r_tilde;
        a wrong one gives log ratio -log(1 + (e^a - 1) r_tilde).

        Args:
            lam: Posterior over the packing
            within: Mask of T (None = whole packing); must contain h*
            h_star: Packing position of h*
            plan: Query distribution
            p: Pr[y != h*(x) | x] per point
            labels: Packed label rows
            alpha: Update rate
        """
        r_tilde = self.disagreement_mass(lam, within, h_star, labels)
        support = list(plan.support)
        q = np.asarray(plan.masses)
        up, down = self._log_terms(r_tilde[support], alpha)
        p_s = np.asarray(p)[support]
        return float(q @ ((1.0 - p_s) * up + p_s * down))

    def expected_positive_part_exact(self, lam, within, h_star: int, plan: QueryPlan, p, labels, alpha: float) -> float:
        """E[max(0, log-ratio)]: only correct labels raise lambda_T(h*)."""
        r_tilde = self.disagreement_mass(lam, within, h_star, labels)
        support = list(plan.support)
        up, _ = self._log_terms(r_tilde[support], alpha)
        return float(np.asarray(plan.masses) @ ((1.0 - np.asarray(p)[support]) * up))

    def growth_lower_bound(self, lam, within, h_star: int, plan: QueryPlan, p, labels, alpha: float) -> float:
        """0.9 alpha (E_q[r_tilde] - 2.3 E_q[p])."""
        r_tilde = self.disagreement_mass(lam, within, h_star, labels)
        support = list(plan.support)
        q = np.asarray(plan.masses)
        return GROWTH_FACTOR * alpha * float(q @ r_tilde[support] - NOISE_FACTOR * (q @ np.asarray(p)[support]))

    def monte_carlo_delta(
        self,
        lam,
        within,
        h_star: int,
        plan: QueryPlan,
        model: LabelModel,
        labels: np.ndarray,
        alpha: float,
        n_samples: int,
        rng: np.random.Generator,
        batch_size: int = 10000,
    ) -> Tuple[float, float]:
        """
        Simulated log lambda_T(h*) changes over n_samples independent updates.

        Returns:
            (mean, standard error)
        """
        lam_t = self._restricted(lam, within, h_star)
        rows = np.flatnonzero(lam_t > 0)
        star = int(np.searchsorted(rows, h_star))
        log_lam = np.log(lam_t[rows])

        support = np.asarray(plan.support)
        cdf = np.cumsum(plan.masses)
        changes = []

        for start in range(0, n_samples, batch_size):
            size = min(batch_size, n_samples - start)
            picks = np.searchsorted(cdf, rng.random(size) * cdf[-1], side='right')
            xs = support[np.minimum(picks, support.size - 1)]
            ys = oracle_service.sample_labels(model, xs, rng)

            wrong = labels[rows][:, xs] != ys
            penalties = -alpha * wrong
            changes.append(penalties[star] - logsumexp(log_lam[:, None] + penalties, axis=0))

        values = np.concatenate(changes)
        stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else float('nan')
        return float(values.mean()), stderr

    # ------------------------------------------------------------------
    # Replay and potential traces
    # ------------------------------------------------------------------

    def replay(self, instance: Instance, record: RunRecord) -> Iterator[ReplayStep]:
        """Rebuild the learner state at every queried iteration of `record`."""
        params = record.params
        members = np.asarray(record.packing)
        position = {int(h): i for i, h in enumerate(members)}
        labels = instance.hclass.labels[members]

        state = LearnerState.start(members.size)
        state.initial_log_weights = record.initial_log_weights.copy()
        state.log_weights = record.initial_log_weights.copy()

        for row in record.trace:
            state.iteration = row.iteration
            for h in row.added:
                state.capped[position[h]] = True

            lam = learner_service.posterior(state)
            lam_bar = learner_service.capped(lam, state.capped, state.log_weights)
            r_bar = learner_service.uncertainty(lam_bar, labels)
            plan = learner_service.solve_query_distribution(r_bar, instance.marginal, params.kappa)

            yield ReplayStep(
                iteration=row.iteration,
                log_weights=state.log_weights.copy(),
                capped=state.capped.copy(),
                lam=lam,
                lam_bar=lam_bar,
                plan=plan,
                x=row.x,
                y=row.y,
            )
            learner_service.update_weights(state, labels, row.x, row.y, params.alpha)

    def tracked_member(self, instance: Instance, record: RunRecord, h_star: int) -> Tuple[int, bool]:
        """h* itself if packed, else its nearest packing member (lowest index on ties)."""
        if h_star in record.packing:
            return h_star, False

        distances = [
            hypothesis_service.distance(instance.hclass, instance.marginal, h_star, h)
            for h in record.packing
        ]
        nearest = record.packing[int(np.argmin(distances))]
        logger.warning(f"h{h_star} is not in the packing; tracking nearest member h{nearest}")
        return nearest, True

    def _log_share(self, log_weights: np.ndarray, mask: np.ndarray, t: int) -> float:
        return float(log_weights[t] - logsumexp(log_weights[mask]))

    def potential_trace(self, instance: Instance, record: RunRecord, h_star: int) -> PotentialTrace:
        """
        phi_i = log lambda_i(h*) + log lambda_{i,H'\\S_i}(h*) (0 once h* is in S_i),
        delta_i = the change of both terms across update i with S_i held
        fixed, psi_k = sum of the first k deltas.

        Raises:
            InvariantViolation: If some |delta_i| exceeds 2 alpha
        """
        alpha = record.params.alpha
        tracked, substituted = self.tracked_member(instance, record, h_star)
        t = list(record.packing).index(tracked)

        members = np.asarray(record.packing)
        labels = instance.hclass.labels[members]
        everything = np.ones(members.size, dtype=bool)

        initial = record.initial_log_weights
        phi0 = 2.0 * self._log_share(initial, everything, t)

        phi, delta, in_s, posterior = [], [], [], []
        log_w = initial
        for step in self.replay(instance, record):
            log_w = step.log_weights
            free = ~step.capped
            posterior.append(math.exp(self._log_share(log_w, everything, t)))

            wrong = labels[:, step.x] != step.y
            log_next = log_w - alpha * wrong

            if step.capped[t]:
                phi.append(0.0)
                delta.append(0.0)
                in_s.append(True)
            else:
                phi.append(self._log_share(log_w, everything, t) + self._log_share(log_w, free, t))
                delta.append(
                    self._log_share(log_next, everything, t) - self._log_share(log_w, everything, t)
                    + self._log_share(log_next, free, t) - self._log_share(log_w, free, t)
                )
                in_s.append(False)

            if abs(delta[-1]) > 2.0 * alpha + 1e-12:
                message = f"Iteration {step.iteration}: |delta| = {abs(delta[-1])} exceeds 2 alpha"
                logger.error(message)
                raise InvariantViolation(message)
            log_w = log_next

        psi = tuple(float(v) for v in np.concatenate([[0.0], np.cumsum(delta)]))
        final_posterior = math.exp(self._log_share(log_w, everything, t))

        return PotentialTrace(
            h_star=h_star,
            tracked=tracked,
            alpha=alpha,
            phi0=phi0,
            phi=tuple(phi),
            delta=tuple(delta),
            psi=psi,
            in_s=tuple(in_s),
            posterior=tuple(posterior),
            final_posterior=final_posterior,
            substituted=substituted,
        )

    def growth_check(self, instance: Instance, record: RunRecord, model: LabelModel, h_star: int) -> pd.DataFrame:
        """
        Per queried iteration with h* outside S_i and for T in {H', H'\\S_i}:
        exact expected change, its lower bound, the positive part and
        alpha * E_q[r_tilde].
        """
        alpha = record.params.alpha
        tracked, _ = self.tracked_member(instance, record, h_star)
        t = list(record.packing).index(tracked)
        labels = instance.hclass.labels[np.asarray(record.packing)]
        p = oracle_service.error_probabilities(model, instance.hclass, tracked)

        rows = []
        for step in self.replay(instance, record):
            if step.capped[t]:
                continue
            for region, within in (('all', None), ('uncapped', ~step.capped)):
                r_tilde = self.disagreement_mass(step.lam, within, t, labels)
                q = np.asarray(step.plan.masses)
                support = list(step.plan.support)
                rows.append({
                    'iteration': step.iteration,
                    'region': region,
                    'expected': self.expected_delta_exact(step.lam, within, t, step.plan, p, labels, alpha),
                    'bound': self.growth_lower_bound(step.lam, within, t, step.plan, p, labels, alpha),
                    'positive_part': self.expected_positive_part_exact(step.lam, within, t, step.plan, p, labels, alpha),
                    'positive_cap': alpha * float(q @ r_tilde[support]),
                })

        return pd.DataFrame(rows, columns=['iteration', 'region', 'expected', 'bound', 'positive_part', 'positive_cap'])

    # ------------------------------------------------------------------
    # Solver cross-check
    # ------------------------------------------------------------------

    def solver_crosscheck(self, r_bar, marginal: Marginal, kappa: float, trials: int, rng: np.random.Generator) -> float:
        """
        Solver objective minus the best objective among `trials` random
        distributions (random support, Dirichlet masses on it).

        Raises:
            InstanceError: If |X| > 8
        """
        if marginal.n > MAX_CROSSCHECK_POINTS:
            raise InstanceError(f"Cross-check supports |X| <= {MAX_CROSSCHECK_POINTS}, got {marginal.n}")

        r = np.asarray(r_bar, dtype=np.float64)
        plan = learner_service.solve_query_distribution(r, marginal, kappa)
        points = np.flatnonzero(marginal.masses > 0)

        best = -np.inf
        for _ in range(trials):
            chosen = points[rng.random(points.size) < 0.5]
            if chosen.size == 0:
                chosen = points[[rng.integers(points.size)]]
            q = rng.dirichlet(np.ones(chosen.size))
            value = float(q @ r[chosen] - kappa * np.max(q / marginal.masses[chosen]))
            best = max(best, value)

        return plan.objective - best


# Singleton instance
analysis_service = AnalysisService()


if __name__ == "__main__":
    """
    Test analysis service.

    Usage:
        python -m app.services.analysis_service
    """
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    from app.services.instance_service import instance_service

    print("=" * 60)
    print("ANALYSIS SERVICE TEST")
    print("=" * 60)

    print("\n1. Exact realizable m*:")
    for n, expected in ((3, 2), (7, 3)):
        m_star = analysis_service.mstar_realizable_exact(instance_service.gen_thresholds(n).hclass)
        if m_star != expected:
            print(f"   ✗ thresholds-{n}: m* = {m_star}, expected {expected}")
            exit(1)
        print(f"   ✓ thresholds-{n}: m* = {m_star}")

    print("\n2. Solver cross-check against random distributions:")
    margin = analysis_service.solver_crosscheck(
        np.array([0.4, 0.3, 0.0]), Marginal.uniform(3), 0.05, 500, np.random.default_rng(0),
    )
    if margin < -1e-9:
        print(f"   ✗ A random distribution beat the solver by {-margin:.3g}")
        exit(1)
    print(f"   ✓ Solver ahead by at least {margin:.4f}")

    print("\n" + "=" * 60)
    print("ALL TESTS PASSED! ✓")
    print("=" * 60)
