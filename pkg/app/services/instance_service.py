"""
Instance Generator Service

Builds every instance family the simulator runs on:
- 1d thresholds h_t(x_j) = 1 iff j >= t
- Unary/binary example (unary block 1..j set, or only j set in the one-hot
  variant; binary block = j-1 big-endian)
- Three-hypothesis example with its concentrated prior
- Set-cover reduction (U, V, D coordinates) with the cover-derived
  identification strategy
- Random Bernoulli classes

Set-cover conventions:
- f(s, u) enumerates the elements of s in ascending order from 0
- (s, j) reads bit j (0 = least significant) of 2 f(s,u) + 1, so (s, 0) is
  the membership indicator
- subset s gets 1 + ceil(log2 |s|) coordinates; D gets ceil(log2 |U|)
"""

import itertools
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.models.hypothesis import (
    Figure1Instance,
    HypothesisClass,
    Instance,
    InstanceError,
    Marginal,
    ReductionInstance,
    ReductionLayout,
    SetCoverInstance,
)


logger = logging.getLogger(__name__)


FIGURE1_ROWS = ('11111111', '11110000', '00001110')
FIGURE1_WEIGHTS = (0.9, 0.1 - 1e-6, 1e-6)
UNARY_ENCODINGS = ('thermometer', 'one_hot')


def _ceil_log2(n: int) -> int:
    return 0 if n <= 1 else math.ceil(math.log2(n))


class InstanceService:
    """
    Usage:
        from app.services.instance_service import instance_service

        instance = instance_service.gen_thresholds(100)
        reduction = instance_service.gen_setcover_reduction(setcover)
    """

    def gen_thresholds(self, n: int, marginal: Optional[Marginal] = None) -> Instance:
        """
        n ordered points, n + 1 thresholds t = 0..n.

        Raises:
            InstanceError: If n < 1 or the marginal has the wrong size
        """
        if n < 1:
            raise InstanceError(f"Threshold domain needs n >= 1, got {n}")

        marginal = marginal or Marginal.uniform(n)
        if marginal.n != n:
            raise InstanceError(f"Marginal has {marginal.n} points, expected {n}")

        taus = np.arange(n + 1)[:, None]
        points = np.arange(n)[None, :]
        labels = (points >= taus).astype(np.uint8)

        names = tuple(f"t={t}" for t in range(n + 1))
        return Instance(HypothesisClass(labels, hypothesis_names=names), marginal, name=f"thresholds-{n}")

    def gen_unary_binary(self, N: int, unary: str = 'thermometer') -> Instance:
        """
        N hypotheses over N + log2 N uniform points. h_j (j = 1..N) writes
        j - 1 big-endian in the binary block. In the unary block it labels
        points 1..j with 1 (thermometer) or only point j (one_hot).

        Under one_hot every unary point stays in the disagreement region
        but splits off a single hypothesis.

        Raises:
            InstanceError: If N is not a power of two or the encoding is unknown
        """
        if N < 2 or N & (N - 1):
            raise InstanceError(f"N must be a power of two >= 2, got {N}")
        if unary not in UNARY_ENCODINGS:
            raise InstanceError(f"Unary encoding must be one of {UNARY_ENCODINGS}, got '{unary}'")

        bits = int(math.log2(N))
        labels = np.zeros((N, N + bits), dtype=np.uint8)

        for j in range(1, N + 1):
            if unary == 'one_hot':
                labels[j - 1, j - 1] = 1
            else:
                labels[j - 1, :j] = 1
            code = j - 1
            for b in range(bits):
                labels[j - 1, N + b] = (code >> (bits - 1 - b)) & 1

        names = tuple(f"h{j}" for j in range(1, N + 1))
        return Instance(
            HypothesisClass(labels, hypothesis_names=names),
            Marginal.uniform(N + bits),
            name=f"unary-binary-{N}" if unary == 'thermometer' else f"unary-binary-{N}-{unary}",
        )

    def gen_figure1(self, eta_mass: float = 0.125) -> Figure1Instance:
        """
        Three hypotheses over 8 uniform points with prior
        (0.9, 0.1 - 1e-6, 1e-6). eta_mass is the suggested corruption budget
        for the matching adversary.
        """
        labels = np.array([[int(c) for c in row] for row in FIGURE1_ROWS], dtype=np.uint8)
        instance = Instance(
            HypothesisClass(labels, hypothesis_names=('h1', 'h2', 'h3')),
            Marginal.uniform(8),
            name="figure1",
        )
        return Figure1Instance(instance=instance, initial_weights=FIGURE1_WEIGHTS, eta_mass=eta_mass)

    def gen_setcover_reduction(self, sc: SetCoverInstance) -> ReductionInstance:
        """
        Learning instance whose identification cost tracks the minimum cover.

        Domain: U, then V = {(s, j)}, then D. Hypotheses: h_u per element,
        h_d per extra coordinate, h_0. Uniform marginal,
        eta = epsilon = 1/(3|X|), delta = 1/(4|H|).
        """
        universe = sc.universe
        widths = [1 + _ceil_log2(len(s)) for s in sc.subsets]
        n_extra = _ceil_log2(len(universe))

        element_points = tuple(range(len(universe)))
        subset_points: List[Tuple[int, ...]] = []
        cursor = len(universe)
        for width in widths:
            subset_points.append(tuple(range(cursor, cursor + width)))
            cursor += width
        extra_points = tuple(range(cursor, cursor + n_extra))
        n_points = cursor + n_extra

        n_hyp = len(universe) + n_extra + 1
        labels = np.zeros((n_hyp, n_points), dtype=np.uint8)

        for k, u in enumerate(universe):
            labels[k, element_points[k]] = 1
            for s, subset in enumerate(sc.subsets):
                if u not in subset:
                    continue
                code = 2 * subset.index(u) + 1
                for j, point in enumerate(subset_points[s]):
                    labels[k, point] = (code >> j) & 1

        for d, point in enumerate(extra_points):
            labels[len(universe) + d, point] = 1

        layout = ReductionLayout(
            element_points=element_points,
            subset_points=tuple(subset_points),
            extra_points=extra_points,
            element_hypotheses=tuple(range(len(universe))),
            extra_hypotheses=tuple(range(len(universe), len(universe) + n_extra)),
            zero_hypothesis=n_hyp - 1,
        )

        names = (
            tuple(f"u{u}" for u in universe)
            + tuple(f"d{d}" for d in range(n_extra))
            + ("zero",)
        )
        instance = Instance(
            HypothesisClass(labels, hypothesis_names=names),
            Marginal.uniform(n_points),
            name=f"setcover-{len(universe)}x{len(sc.subsets)}",
        )

        logger.debug(f"Set-cover reduction: |X|={n_points} |H|={n_hyp}")
        return ReductionInstance(
            instance=instance,
            setcover=sc,
            layout=layout,
            eta=1.0 / (3 * n_points),
            epsilon=1.0 / (3 * n_points),
            delta=1.0 / (4 * n_hyp),
        )

    def cover_strategy_replay(
        self,
        reduction: ReductionInstance,
        cover: Sequence[int],
        h: int,
    ) -> Tuple[int, int]:
        """
        Run the cover-derived strategy against hypothesis h as the truth:
        query (s, 0) for s in the cover; on a hit read u from (s, 1..);
        otherwise query D one coordinate at a time.

        Returns:
            (identified hypothesis, queries used)
        """
        labels = reduction.instance.hclass.labels
        row = labels[reduction.instance.hclass.check_index(h)]
        layout = reduction.layout
        subsets = reduction.setcover.subsets
        queries = 0

        for s in cover:
            points = layout.subset_points[s]
            queries += 1
            if row[points[0]] == 0:
                continue

            code = 1
            for j, point in enumerate(points[1:], start=1):
                queries += 1
                code |= int(row[point]) << j
            u = subsets[s][(code - 1) // 2]
            return layout.element_hypotheses[reduction.setcover.universe.index(u)], queries

        for d, point in enumerate(layout.extra_points):
            queries += 1
            if row[point] == 1:
                return layout.extra_hypotheses[d], queries

        return layout.zero_hypothesis, queries

    def min_set_cover_bruteforce(self, sc: SetCoverInstance) -> Tuple[int, ...]:
        """Smallest cover by exhaustive search in increasing size."""
        target = set(sc.universe)
        for size in range(1, len(sc.subsets) + 1):
            for combo in itertools.combinations(range(len(sc.subsets)), size):
                if set().union(*(sc.subsets[s] for s in combo)) == target:
                    return combo
        raise InstanceError("Set-cover instance has no cover")

    def parse_setcover(self, text: str) -> SetCoverInstance:
        """
        One subset per line, space-separated element ids. Optional
        'universe: ...' line; '#' starts a comment.

        Raises:
            InstanceError: On a malformed line (with its line number)
        """
        universe: Optional[List[int]] = None
        subsets: List[Tuple[int, ...]] = []

        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            try:
                if line.lower().startswith('universe'):
                    universe = [int(tok) for tok in line.split(':', 1)[1].split()]
                else:
                    subsets.append(tuple(int(tok) for tok in line.split()))
            except (ValueError, IndexError) as e:
                raise InstanceError(f"Set-cover line {lineno}: cannot parse '{raw.strip()}'") from e

        if universe is None:
            universe = sorted(set(itertools.chain.from_iterable(subsets)))
        return SetCoverInstance(universe=tuple(universe), subsets=tuple(subsets))

    def gen_random(self, n_hypotheses: int, n_points: int, density: float, seed: int) -> Instance:
        """
        i.i.d. Bernoulli(density) labels, uniform marginal, seeded.

        Raises:
            InstanceError: Bad sizes or density
        """
        if n_hypotheses < 1 or n_points < 1:
            raise InstanceError(f"Sizes must be >= 1, got |H|={n_hypotheses} |X|={n_points}")
        if not 0 <= density <= 1:
            raise InstanceError(f"Density must lie in [0, 1], got {density}")

        rng = np.random.default_rng(seed)
        labels = (rng.random((n_hypotheses, n_points)) < density).astype(np.uint8)
        return Instance(
            HypothesisClass(labels),
            Marginal.uniform(n_points),
            name=f"random-{n_hypotheses}x{n_points}-s{seed}",
        )

    def from_spec(self, spec: Dict[str, Any]) -> Instance:
        """
        Build an instance from a config generator invocation.

        Spec examples:
            {"generator": "thresholds", "n": 100}
            {"generator": "unary_binary", "N": 256, "unary": "one_hot"}
            {"generator": "figure1"}
            {"generator": "random", "n_hypotheses": 10, "n_points": 8, "density": 0.5, "seed": 3}
            {"generator": "setcover", "subsets": [[1], [2], [1, 2]]}

        Raises:
            InstanceError: Unknown generator or missing argument
        """
        kind = spec.get('generator')
        try:
            if kind == 'thresholds':
                return self.gen_thresholds(int(spec['n']))
            if kind == 'unary_binary':
                return self.gen_unary_binary(int(spec['N']), spec.get('unary', 'thermometer'))
            if kind == 'figure1':
                return self.gen_figure1(float(spec.get('eta_mass', 0.125))).instance
            if kind == 'random':
                return self.gen_random(
                    int(spec['n_hypotheses']), int(spec['n_points']),
                    float(spec.get('density', 0.5)), int(spec.get('seed', 0)),
                )
            if kind == 'setcover':
                subsets = tuple(tuple(s) for s in spec['subsets'])
                universe = spec.get('universe') or sorted(set(itertools.chain.from_iterable(subsets)))
                sc = SetCoverInstance(universe=tuple(universe), subsets=subsets)
                return self.gen_setcover_reduction(sc).instance
        except KeyError as e:
            raise InstanceError(f"Generator '{kind}' is missing argument {e}") from e

        raise InstanceError(f"Unknown generator: '{kind}'")


# Singleton instance
instance_service = InstanceService()


if __name__ == "__main__":
    """
    Test instance service.

    Usage:
        python -m app.services.instance_service
    """
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    print("=" * 60)
    print("INSTANCE SERVICE TEST")
    print("=" * 60)

    print("\n1. Generators:")
    for instance in (
        instance_service.gen_thresholds(8),
        instance_service.gen_unary_binary(8),
        instance_service.gen_unary_binary(8, unary='one_hot'),
        instance_service.gen_figure1().instance,
        instance_service.gen_random(6, 5, 0.5, seed=0),
    ):
        print(f"   - {instance.name}: |H|={instance.hclass.n_hypotheses} |X|={instance.hclass.domain_size}")

    print("\n2. Set-cover reduction:")
    try:
        sc = instance_service.parse_setcover("1 2\n2 3\n3 4\n1 4\n")
        reduction = instance_service.gen_setcover_reduction(sc)
        cover = instance_service.min_set_cover_bruteforce(sc)
        print(f"   ✓ |H|={reduction.instance.hclass.n_hypotheses}, eta = {reduction.eta:.6g}, min cover {cover}")
    except InstanceError as e:
        print(f"   ✗ Failed: {e}")
        exit(1)

    print("\n" + "=" * 60)
    print("ALL TESTS PASSED! ✓")
    print("=" * 60)
