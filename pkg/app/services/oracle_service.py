"""
Label Oracle Service

Defines the joint distribution D over X x {0,1} and answers label queries:
- Exact error err(h) = Pr_{(x,y) ~ D}[h(x) != y] (no sampling)
- Seeded label draws y ~ (Y | X = x)
- Constructors: realizable, i.i.d. flip, g-adversary (one-sided corruption
  toward 0), the three-hypothesis example adversary, explicit tables
- Building a model from an oracle spec of a run config

Every constructor returns an immutable LabelModel; sampling only touches the
caller's Generator.
"""

import logging
from typing import Any, Dict, Sequence

import numpy as np

from app.models.hypothesis import HypothesisClass, Instance, Marginal
from app.models.labels import LabelModel, NoiseBudgetReport, OracleError


logger = logging.getLogger(__name__)


BUDGET_TOLERANCE = 1e-12


class OracleService:
    """
    Usage:
        from app.services.oracle_service import oracle_service

        model = oracle_service.make_iid_flip(hclass, marginal, h_star=3, rho=0.1)
        y = oracle_service.sample_label(model, x=5, rng=rng)
    """

    def _check(self, model: LabelModel, hclass: HypothesisClass, marginal: Marginal):
        if not (hclass.domain_size == marginal.n == model.p1.size):
            raise OracleError(
                f"Size mismatch: class domain {hclass.domain_size}, marginal {marginal.n}, "
                f"label table {model.p1.size}"
            )

    def error_probabilities(self, model: LabelModel, hclass: HypothesisClass, h: int) -> np.ndarray:
        """p(x) = Pr[y != h(x) | x] per point."""
        row = hclass.labels[hclass.check_index(h)]
        return np.where(row == 1, 1.0 - model.p1, model.p1)

    def true_error(self, model: LabelModel, hclass: HypothesisClass, marginal: Marginal, h: int) -> float:
        """
        Exact err(h) = sum_x D_X(x) * (h(x) = 1 ? 1 - p1(x) : p1(x)).

        Raises:
            OracleError: If sizes are inconsistent
        """
        self._check(model, hclass, marginal)
        return float(marginal.masses @ self.error_probabilities(model, hclass, h))

    def error_vector(self, model: LabelModel, hclass: HypothesisClass, marginal: Marginal) -> np.ndarray:
        """err(h) for every hypothesis."""
        self._check(model, hclass, marginal)
        labels = hclass.labels.astype(np.float64)
        per_point = labels * (1.0 - model.p1) + (1.0 - labels) * model.p1
        return per_point @ marginal.masses

    def best_hypothesis(self, model: LabelModel, hclass: HypothesisClass, marginal: Marginal) -> NoiseBudgetReport:
        """h* = argmin err(h) (lowest index on ties) and eta* = err(h*)."""
        errors = self.error_vector(model, hclass, marginal)
        best = int(np.argmin(errors))
        return NoiseBudgetReport(best=best, error=float(errors[best]))

    def sample_label(self, model: LabelModel, x: int, rng: np.random.Generator) -> int:
        """
        Draw y ~ Bernoulli(p1(x)).

        Raises:
            OracleError: If x is out of range
        """
        if not 0 <= int(x) < model.p1.size:
            raise OracleError(f"Point index {x} out of range [0, {model.p1.size})")
        return int(rng.random() < model.p1[int(x)])

    def sample_labels(self, model: LabelModel, xs: Sequence[int], rng: np.random.Generator) -> np.ndarray:
        """Vectorized sample_label over a batch of points."""
        xs = np.asarray(xs, dtype=np.int64)
        if xs.size and (xs.min() < 0 or xs.max() >= model.p1.size):
            raise OracleError(f"Point index out of range [0, {model.p1.size})")
        return (rng.random(xs.size) < model.p1[xs]).astype(np.int64)

    def make_realizable(self, hclass: HypothesisClass, marginal: Marginal, h_star: int) -> LabelModel:
        """Labels are exactly h*'s row."""
        row = hclass.labels[hclass.check_index(h_star)]
        return LabelModel(
            p1=row.astype(np.float64), marginal=marginal,
            kind='realizable', params={'h_star': int(h_star)},
        )

    def make_iid_flip(self, hclass: HypothesisClass, marginal: Marginal, h_star: int, rho: float) -> LabelModel:
        """
        h*'s label flipped independently with probability rho at every point.

        Raises:
            OracleError: If rho is outside [0, 0.5)
        """
        if not 0 <= rho < 0.5:
            raise OracleError(f"Flip rate must lie in [0, 0.5), got {rho}")

        row = hclass.labels[hclass.check_index(h_star)].astype(np.float64)
        p1 = row * (1.0 - rho) + (1.0 - row) * rho
        return LabelModel(
            p1=p1, marginal=marginal,
            kind='iid_flip', params={'h_star': int(h_star), 'rho': float(rho)},
        )

    def make_g_adversary(self, hclass: HypothesisClass, marginal: Marginal, h_star: int, g) -> LabelModel:
        """
        One-sided corruption: p1(x) = h*(x) * (1 - g(x)).

        The budget E[g h*] <= eta is the caller's to respect; it is logged.

        Raises:
            OracleError: If g has the wrong size or leaves [0, 1]
        """
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (marginal.n,):
            raise OracleError(f"g has shape {g.shape}, expected ({marginal.n},)")
        if np.any(g < 0) or np.any(g > 1):
            raise OracleError("g entries must lie in [0, 1]")

        row = hclass.labels[hclass.check_index(h_star)].astype(np.float64)
        budget = float(marginal.masses @ (row * g))
        logger.debug(f"g-adversary on h*={h_star} spends corruption mass {budget:.6g}")

        return LabelModel(
            p1=row * (1.0 - g), marginal=marginal,
            kind='g_adversary', params={'h_star': int(h_star), 'budget': budget},
        )

    def make_figure1_adversary(
        self,
        hclass: HypothesisClass,
        marginal: Marginal,
        h3: int,
        eta: float,
        h1: int = 0,
        h2: int = 1,
    ) -> LabelModel:
        """
        Labels equal h3 except on an eta-mass part of the region where h1
        and h3 disagree inside the h1/h2 disagreement region; there the
        label takes h1's value. Points are corrupted lowest index first; a
        partially spent point gets a fractional flip probability.

        Raises:
            OracleError: If eta exceeds the corruptible mass
        """
        if eta < 0:
            raise OracleError(f"eta must be >= 0, got {eta}")

        labels = hclass.labels
        r1, r2, r3 = (labels[hclass.check_index(h)].astype(np.float64) for h in (h1, h2, h3))
        region = np.flatnonzero((r1 != r2) & (r1 != r3))
        available = float(marginal.masses[region].sum())

        if eta > available + BUDGET_TOLERANCE:
            raise OracleError(
                f"Corruption budget {eta} exceeds the available mass {available} "
                f"where h{h1}/h{h3} disagree inside the h{h1}/h{h2} region"
            )

        p1 = r3.copy()
        remaining = eta
        for x in region:
            if remaining <= BUDGET_TOLERANCE:
                break
            share = min(1.0, remaining / marginal.masses[x]) if marginal.masses[x] > 0 else 0.0
            p1[x] = r3[x] + (r1[x] - r3[x]) * share
            remaining -= share * marginal.masses[x]

        return LabelModel(
            p1=p1, marginal=marginal,
            kind='figure1', params={'h_star': int(h3), 'eta': float(eta)},
        )

    def make_explicit_table(self, marginal: Marginal, p1) -> LabelModel:
        """Verbatim Pr[y = 1 | x] table."""
        return LabelModel(p1=np.asarray(p1, dtype=np.float64), marginal=marginal, kind='explicit_table')

    def from_spec(self, spec: Dict[str, Any], instance: Instance) -> LabelModel:
        """
        Build a model from a config oracle spec.

        Spec kinds:
            {"kind": "realizable", "h_star": 3}
            {"kind": "iid_flip", "h_star": 3, "rho": 0.1}
            {"kind": "g_adversary", "h_star": 3, "g": [...]}
            {"kind": "figure1", "h_star": 2, "eta": 0.125}
            {"kind": "explicit_table", "p1": [...]}

        Raises:
            OracleError: Unknown kind or missing parameter
        """
        hclass, marginal = instance.hclass, instance.marginal
        kind = spec.get('kind')

        try:
            if kind == 'realizable':
                return self.make_realizable(hclass, marginal, spec['h_star'])
            if kind == 'iid_flip':
                return self.make_iid_flip(hclass, marginal, spec['h_star'], float(spec['rho']))
            if kind == 'g_adversary':
                return self.make_g_adversary(hclass, marginal, spec['h_star'], spec['g'])
            if kind == 'figure1':
                return self.make_figure1_adversary(
                    hclass, marginal, spec.get('h_star', 2), float(spec['eta']),
                    h1=spec.get('h1', 0), h2=spec.get('h2', 1),
                )
            if kind == 'explicit_table':
                return self.make_explicit_table(marginal, spec['p1'])
        except KeyError as e:
            raise OracleError(f"Oracle spec of kind '{kind}' is missing parameter {e}") from e

        raise OracleError(f"Unknown oracle kind: '{kind}'")


# Singleton instance
oracle_service = OracleService()


if __name__ == "__main__":
    """
    Test oracle service.

    Usage:
        python -m app.services.oracle_service
    """
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    from app.services.instance_service import instance_service

    print("=" * 60)
    print("ORACLE SERVICE TEST")
    print("=" * 60)

    thresholds = instance_service.gen_thresholds(10)
    model = oracle_service.make_iid_flip(thresholds.hclass, thresholds.marginal, 6, 0.1)

    print("\n1. Exact errors under a 0.1 flip rate around t=6:")
    errors = oracle_service.error_vector(model, thresholds.hclass, thresholds.marginal)
    for h, error in enumerate(errors):
        print(f"   - t={h}: {error:.3f}")

    print("\n2. Noise budget:")
    report = oracle_service.best_hypothesis(model, thresholds.hclass, thresholds.marginal)
    if report.best != 6 or not np.isclose(report.error, 0.1):
        print(f"   ✗ Expected t=6 with eta* = 0.1, got t={report.best} with {report.error:.4f}")
        exit(1)
    print(f"   ✓ h* = t={report.best}, eta* = {report.error:.3f}")

    print("\n3. Sampled labels at x=8:")
    ys = oracle_service.sample_labels(model, [8] * 2000, np.random.default_rng(0))
    print(f"   ✓ Fraction labelled 1: {ys.mean():.3f} (expected 0.9)")

    print("\n" + "=" * 60)
    print("ALL TESTS PASSED! ✓")
    print("=" * 60)
