"""
Baseline Learners

Comparison points for the main learner, all on the same oracle:
- passive_erm: budget i.i.d. draws from D_X, empirical-error minimizer
- greedy_split: query the point that splits the version space most evenly
  (no noise handling)
- uniform_disagreement: sample D_X conditioned on the region where the
  version space still disagrees
"""

import logging

import numpy as np

from app.models.experiment import BASELINE_KINDS, BaselineResult
from app.models.hypothesis import Instance
from app.models.labels import LabelModel
from app.services.oracle_service import oracle_service


logger = logging.getLogger(__name__)


class BaselineError(ValueError):
    """Unknown baseline kind or negative budget."""
    pass


class BaselineService:
    """
    Usage:
        from app.services.baseline_service import baseline_service

        result = baseline_service.run_baseline('greedy_split', instance, model, 50, rng)
    """

    def run_baseline(
        self,
        kind: str,
        instance: Instance,
        model: LabelModel,
        budget: int,
        rng: np.random.Generator,
    ) -> BaselineResult:
        """
        Raises:
            BaselineError: Unknown kind or budget < 0
        """
        if kind not in BASELINE_KINDS:
            raise BaselineError(f"Unknown baseline '{kind}'. Must be one of: {', '.join(BASELINE_KINDS)}")
        if budget < 0:
            raise BaselineError(f"Budget must be >= 0, got {budget}")

        if budget == 0:
            logger.warning(f"{kind} called with budget 0; returning h0")
            return BaselineResult(kind=kind, hypothesis=0, queries=0, flags=('zero_budget',))

        runner = getattr(self, kind)
        return runner(instance, model, budget, rng)

    def passive_erm(self, instance: Instance, model: LabelModel, budget: int, rng: np.random.Generator) -> BaselineResult:
        masses = instance.marginal.masses
        cdf = np.cumsum(masses)
        xs = np.minimum(np.searchsorted(cdf, rng.random(budget) * cdf[-1], side='right'), masses.size - 1)
        ys = oracle_service.sample_labels(model, xs, rng)

        errors = (instance.hclass.labels[:, xs] != ys).sum(axis=1)
        best = int(np.argmin(errors))
        return BaselineResult(kind='passive_erm', hypothesis=best, queries=budget)

    def greedy_split(self, instance: Instance, model: LabelModel, budget: int, rng: np.random.Generator) -> BaselineResult:
        labels = instance.hclass.labels
        queryable = instance.marginal.masses > 0
        alive = np.arange(instance.hclass.n_hypotheses)
        queries = 0

        while queries < budget:
            ones = labels[alive].mean(axis=0)
            split = np.where(queryable, np.minimum(ones, 1.0 - ones), -1.0)
            x = int(np.argmax(split))
            if split[x] <= 0:
                break

            y = oracle_service.sample_label(model, x, rng)
            queries += 1
            # x splits the survivors, so either label keeps some of them
            alive = alive[labels[alive, x] == y]

        return BaselineResult(kind='greedy_split', hypothesis=int(alive[0]), queries=queries)

    def uniform_disagreement(
        self,
        instance: Instance,
        model: LabelModel,
        budget: int,
        rng: np.random.Generator,
    ) -> BaselineResult:
        labels = instance.hclass.labels
        masses = instance.marginal.masses
        alive = np.arange(instance.hclass.n_hypotheses)
        queries = 0

        while queries < budget:
            rows = labels[alive]
            region = np.flatnonzero((rows.min(axis=0) != rows.max(axis=0)) & (masses > 0))
            if region.size == 0:
                break

            cdf = np.cumsum(masses[region])
            pick = int(np.searchsorted(cdf, rng.random() * cdf[-1], side='right'))
            x = int(region[min(pick, region.size - 1)])

            y = oracle_service.sample_label(model, x, rng)
            queries += 1
            alive = alive[labels[alive, x] == y]

        return BaselineResult(kind='uniform_disagreement', hypothesis=int(alive[0]), queries=queries)


# Singleton instance
baseline_service = BaselineService()


if __name__ == "__main__":
    """
    Test baseline service.

    Usage:
        python -m app.services.baseline_service
    """
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    from app.services.instance_service import instance_service

    print("=" * 60)
    print("BASELINE SERVICE TEST")
    print("=" * 60)

    thresholds = instance_service.gen_thresholds(16)
    model = oracle_service.make_realizable(thresholds.hclass, thresholds.marginal, 5)

    print("\nRealizable thresholds-16, h* = t=5:")
    for kind in BASELINE_KINDS:
        result = baseline_service.run_baseline(kind, thresholds, model, 256, np.random.default_rng(0))
        if result.hypothesis != 5:
            print(f"   ✗ {kind}: returned t={result.hypothesis}")
            exit(1)
        print(f"   ✓ {kind}: t={result.hypothesis} after {result.queries} queries")

    print("\n" + "=" * 60)
    print("ALL TESTS PASSED! ✓")
    print("=" * 60)
