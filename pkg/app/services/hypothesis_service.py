"""
Hypothesis Space Service

Metric operations over a finite hypothesis class:
- Pseudometric ||h - h'|| = Pr_{x ~ D_X}[h(x) != h'(x)]
- Ball masses under a weight vector (closed balls, <= radius)
- Heaviest ball over packing members
- Greedy maximal packing in index order (strict > 2*eta)
- Brute-force minimum cover (diagnostic, |H| <= 20)

Distances are the dot product of the disagreement indicator with the point
masses. distance_matrix takes one matrix-vector product per row, and the
packing compares each candidate against all members in a single product.
"""

import itertools
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from app.models.hypothesis import HypothesisClass, Instance, InstanceError, Marginal, Packing


logger = logging.getLogger(__name__)


WEIGHT_TOLERANCE = 1e-9
MAX_COVER_CLASS = 20


class HypothesisService:
    """
    Usage:
        from app.services.hypothesis_service import hypothesis_service

        d = hypothesis_service.distance(hclass, marginal, 0, 1)
        packing = hypothesis_service.greedy_maximal_packing(hclass, marginal, 0.2)
    """

    def _check_pair(self, hclass: HypothesisClass, marginal: Marginal):
        if hclass.domain_size != marginal.n:
            raise InstanceError(
                f"Marginal has {marginal.n} points but the class has domain size {hclass.domain_size}"
            )

    def distance(self, hclass: HypothesisClass, marginal: Marginal, h: int, h2: int) -> float:
        """
        Probability mass of the disagreement region of h and h2.

        Raises:
            InstanceError: If an index is out of range or sizes mismatch
        """
        self._check_pair(hclass, marginal)
        h, h2 = hclass.check_index(h), hclass.check_index(h2)

        disagree = hclass.labels[h] != hclass.labels[h2]
        return float(marginal.masses @ disagree)

    def distance_matrix(
        self,
        hclass: HypothesisClass,
        marginal: Marginal,
        rows: Optional[Sequence[int]] = None,
    ) -> np.ndarray:
        """
        Pairwise distance table over `rows` (all hypotheses by default).

        O(|rows|^2 |X|); computed once per run and reused every iteration.
        """
        self._check_pair(hclass, marginal)
        labels = hclass.labels if rows is None else hclass.labels[list(rows)]

        table = np.empty((labels.shape[0], labels.shape[0]))
        for i in range(labels.shape[0]):
            table[i] = (labels != labels[i]) @ marginal.masses
        return table

    def ball_masses(self, distances: np.ndarray, weights: np.ndarray, radius: float) -> np.ndarray:
        """Mass of the closed radius ball around every row of `distances`."""
        return (distances <= radius) @ weights

    def _check_weights(self, hclass: HypothesisClass, weights) -> np.ndarray:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (hclass.n_hypotheses,):
            raise InstanceError(f"Weights have shape {weights.shape}, class has {hclass.n_hypotheses} hypotheses")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise InstanceError("Weights must be a distribution (nonnegative, summing to 1)")
        return weights

    def ball_mass(
        self,
        hclass: HypothesisClass,
        marginal: Marginal,
        weights,
        center: int,
        radius: float,
    ) -> float:
        """
        Weight of B(center, radius) = {h : ||center - h|| <= radius}.

        Raises:
            InstanceError: Invalid center or weights, negative radius
        """
        self._check_pair(hclass, marginal)
        center = hclass.check_index(center)
        if radius < 0:
            raise InstanceError(f"Radius must be >= 0, got {radius}")
        weights = self._check_weights(hclass, weights)

        disagree = hclass.labels != hclass.labels[center]
        distances = disagree @ marginal.masses
        return float(weights[distances <= radius].sum())

    def heaviest_ball(
        self,
        hclass: HypothesisClass,
        marginal: Marginal,
        weights,
        radius: float,
        centers: Optional[Sequence[int]] = None,
    ) -> Tuple[int, float]:
        """
        Heaviest closed radius ball, centers restricted to `centers`
        (the weight support by default). Ties go to the lowest index.

        Returns:
            (center index, mass)

        Raises:
            InstanceError: Empty weight support or invalid radius
        """
        self._check_pair(hclass, marginal)
        if radius < 0:
            raise InstanceError(f"Radius must be >= 0, got {radius}")
        weights = self._check_weights(hclass, weights)

        if centers is None:
            centers = np.flatnonzero(weights > 0)
        centers = sorted(hclass.check_index(c) for c in centers)
        if not centers:
            raise InstanceError("Cannot pick a heaviest ball: weight support is empty")

        distances = self.distance_matrix(hclass, marginal)[centers]
        masses = self.ball_masses(distances, weights, radius)
        best = int(np.argmax(masses))
        return centers[best], float(masses[best])

    def greedy_maximal_packing(self, hclass: HypothesisClass, marginal: Marginal, radius: float) -> Packing:
        """
        Admit h in index order iff its distance to every admitted member is
        strictly greater than `radius` (the 2*eta of the learner).
        """
        self._check_pair(hclass, marginal)
        if radius < 0:
            raise InstanceError(f"Packing radius must be >= 0, got {radius}")

        members = []
        member_rows = np.empty((0, hclass.domain_size), dtype=hclass.labels.dtype)

        for h in range(hclass.n_hypotheses):
            row = hclass.labels[h]
            distances = (member_rows != row) @ marginal.masses
            if np.all(distances > radius):
                members.append(h)
                member_rows = np.vstack([member_rows, row])

        logger.debug(f"Packing at radius {radius}: {len(members)} of {hclass.n_hypotheses} hypotheses")
        return Packing(members=tuple(members), radius=float(radius))

    def min_cover_bruteforce(self, hclass: HypothesisClass, marginal: Marginal, alpha: float) -> int:
        """
        Size of the smallest alpha-cover N(H, D_X, alpha), by exhaustive
        subset search in increasing size.

        Raises:
            InstanceError: If |H| > 20
        """
        if hclass.n_hypotheses > MAX_COVER_CLASS:
            raise InstanceError(
                f"min_cover_bruteforce supports |H| <= {MAX_COVER_CLASS}, got {hclass.n_hypotheses}"
            )

        within = self.distance_matrix(hclass, marginal) <= alpha
        n = hclass.n_hypotheses

        for size in range(1, n + 1):
            for subset in itertools.combinations(range(n), size):
                if within[list(subset)].any(axis=0).all():
                    return size
        return n

    def packing_distances(self, instance: Instance, packing: Packing) -> np.ndarray:
        """Distance table restricted to packing members (|H'| x |H'|)."""
        return self.distance_matrix(instance.hclass, instance.marginal, packing.members)


# Singleton instance
hypothesis_service = HypothesisService()


if __name__ == "__main__":
    """
    Test hypothesis service.

    Usage:
        python -m app.services.hypothesis_service
    """

    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    from app.services.instance_service import instance_service

    print("\n" + "#"*60)
    print("# HYPOTHESIS SERVICE TEST SUITE")
    print("#"*60)

    results = []
    thresholds = instance_service.gen_thresholds(4)

    # =================================================================
    # TEST 1: Distances
    # =================================================================
    print("\n" + "="*60)
    print("TEST 1: Distances on thresholds-4")
    print("="*60)

    try:
        table = hypothesis_service.distance_matrix(thresholds.hclass, thresholds.marginal)
        print(table)
        symmetric = np.allclose(table, table.T)
        extremes = hypothesis_service.distance(thresholds.hclass, thresholds.marginal, 0, 4) == 1.0
        if symmetric and extremes:
            print("✅ Distances PASSED")
            results.append(("Distances", True))
        else:
            print("❌ Distance table is not symmetric or ||t=0 - t=4|| != 1")
            results.append(("Distances", False))
    except Exception as e:
        print(f"❌ Error: {e}")
        results.append(("Distances", False))

    # =================================================================
    # TEST 2: Packing and cover
    # =================================================================
    print("\n" + "="*60)
    print("TEST 2: Packing and cover")
    print("="*60)

    try:
        packing = hypothesis_service.greedy_maximal_packing(thresholds.hclass, thresholds.marginal, 0.25)
        cover = hypothesis_service.min_cover_bruteforce(thresholds.hclass, thresholds.marginal, 0.25)
        print(f"Packing at 0.25: {packing.members}")
        print(f"Minimum 0.25-cover: {cover}")
        if cover == 2 and len(packing) <= 5:
            print("✅ Packing and cover PASSED")
            results.append(("Packing and cover", True))
        else:
            print(f"❌ Expected a 0.25-cover of size 2, got {cover}")
            results.append(("Packing and cover", False))
    except Exception as e:
        print(f"❌ Error: {e}")
        results.append(("Packing and cover", False))

    # =================================================================
    # TEST 3: Heaviest ball
    # =================================================================
    print("\n" + "="*60)
    print("TEST 3: Ball masses under uniform weights")
    print("="*60)

    try:
        table = hypothesis_service.distance_matrix(thresholds.hclass, thresholds.marginal)
        masses = hypothesis_service.ball_masses(table, np.full(5, 0.2), 0.25)
        print(f"Ball masses at 0.25: {masses}")
        if np.isclose(masses.max(), 0.6):
            print("✅ Ball masses PASSED")
            results.append(("Ball masses", True))
        else:
            print(f"❌ Expected an interior ball of mass 0.6, got {masses.max()}")
            results.append(("Ball masses", False))
    except Exception as e:
        print(f"❌ Error: {e}")
        results.append(("Ball masses", False))

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
