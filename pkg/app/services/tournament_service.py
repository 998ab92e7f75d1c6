"""
Stage-Two Tournament Service

Reduces the center list C to one hypothesis with pairwise duels:
- A duel samples D_X conditioned on the disagreement region of (h, h')
- Exactly one of the pair errs on every such query
- The hypothesis with more mistakes is eliminated (ties eliminate the
  higher index)
- Pairs at distance >= 3 * eta_tilde are dueled lowest-index first
"""

import logging
import math
from typing import Sequence

import numpy as np

from app.models.hypothesis import HypothesisClass, Marginal
from app.models.labels import LabelModel
from app.models.learner import DuelOutcome, TournamentResult
from app.services.hypothesis_service import hypothesis_service
from app.services.oracle_service import oracle_service


logger = logging.getLogger(__name__)


class TournamentError(Exception):
    """Empty candidate list or empty disagreement region."""
    pass


class TournamentService:
    """
    Usage:
        from app.services.tournament_service import tournament_service

        result = tournament_service.tournament(hclass, marginal, model, [3, 7, 9], eta_tilde, 0.1, rng)
        print(result.winner, result.queries)
    """

    def samples_per_duel(self, n_candidates: int, delta: float, duel_constant: float = 48.0) -> int:
        """n = ceil(c_d * ln(2 |C0| / delta))."""
        return max(1, math.ceil(duel_constant * math.log(2 * n_candidates / delta)))

    def duel(
        self,
        hclass: HypothesisClass,
        marginal: Marginal,
        model: LabelModel,
        h: int,
        h2: int,
        n: int,
        rng: np.random.Generator,
    ) -> DuelOutcome:
        """
        n conditional-disagreement queries between h and h2.

        Raises:
            TournamentError: If the pair never disagrees on positive mass or n < 1
        """
        h, h2 = hclass.check_index(h), hclass.check_index(h2)
        if n < 1:
            raise TournamentError(f"A duel needs n >= 1 samples, got {n}")

        region = np.flatnonzero((hclass.labels[h] != hclass.labels[h2]) & (marginal.masses > 0))
        if region.size == 0:
            raise TournamentError(f"h{h} and h{h2} have an empty disagreement region")

        cdf = np.cumsum(marginal.masses[region])
        picks = np.searchsorted(cdf, rng.random(n) * cdf[-1], side='right')
        xs = region[np.minimum(picks, region.size - 1)]
        ys = oracle_service.sample_labels(model, xs, rng)

        mistakes_h = int(np.sum(hclass.labels[h, xs] != ys))
        mistakes_h2 = int(np.sum(hclass.labels[h2, xs] != ys))

        if mistakes_h > mistakes_h2:
            eliminated = h
        elif mistakes_h2 > mistakes_h:
            eliminated = h2
        else:
            eliminated = max(h, h2)

        logger.debug(f"Duel h{h} vs h{h2}: {mistakes_h}/{mistakes_h2} mistakes, h{eliminated} out")
        return DuelOutcome(
            h=h, h2=h2, n=n,
            mistakes_h=mistakes_h, mistakes_h2=mistakes_h2,
            eliminated=eliminated,
        )

    def tournament(
        self,
        hclass: HypothesisClass,
        marginal: Marginal,
        model: LabelModel,
        candidates: Sequence[int],
        eta_tilde: float,
        delta: float,
        rng: np.random.Generator,
        duel_constant: float = 48.0,
    ) -> TournamentResult:
        """
        Duel far-apart pairs until every survivor is within 3 * eta_tilde
        of the others, then return the lowest-index survivor.

        Raises:
            TournamentError: If candidates is empty
        """
        alive = sorted({hclass.check_index(c) for c in candidates})
        if not alive:
            raise TournamentError("Tournament needs at least one candidate")

        n = self.samples_per_duel(len(alive), delta, duel_constant)
        table = hypothesis_service.distance_matrix(hclass, marginal, alive)
        position = {h: i for i, h in enumerate(alive)}
        separation = 3.0 * eta_tilde
        duels = []

        def far_apart(a: int, b: int) -> bool:
            d = table[position[a], position[b]]
            return d >= separation and d > 0

        while True:
            pair = next(
                ((a, b) for i, a in enumerate(alive) for b in alive[i + 1:] if far_apart(a, b)),
                None,
            )
            if pair is None:
                break

            outcome = self.duel(hclass, marginal, model, pair[0], pair[1], n, rng)
            duels.append(outcome)
            alive.remove(outcome.eliminated)

        logger.info(f"Tournament: {len(duels)} duels x {n} samples, winner h{alive[0]}")
        return TournamentResult(winner=alive[0], duels=tuple(duels), samples_per_duel=n)


# Singleton instance
tournament_service = TournamentService()


if __name__ == "__main__":
    """
    Test tournament service.

    Usage:
        python -m app.services.tournament_service
    """
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    from app.services.instance_service import instance_service

    print("=" * 60)
    print("TOURNAMENT SERVICE TEST")
    print("=" * 60)

    thresholds = instance_service.gen_thresholds(10)
    candidates = [0, 3, 6, 9]

    print("\n1. Samples per duel:")
    n = tournament_service.samples_per_duel(len(candidates), 0.1)
    print(f"   ✓ {n} samples for {len(candidates)} candidates at delta = 0.1")

    print("\n2. Realizable tournament (h* = t=6):")
    model = oracle_service.make_realizable(thresholds.hclass, thresholds.marginal, 6)
    result = tournament_service.tournament(
        thresholds.hclass, thresholds.marginal, model, candidates, 0.01, 0.1, np.random.default_rng(0),
    )
    for duel in result.duels:
        print(f"   - t={duel.h} vs t={duel.h2}: mistakes {duel.mistakes_h}/{duel.mistakes_h2}, out t={duel.eliminated}")
    if result.winner != 6:
        print(f"   ✗ Winner t={result.winner}, expected t=6")
        exit(1)
    print(f"   ✓ Winner t=6 after {result.queries} queries")

    print("\n3. Noisy tournament (flip rate 0.08):")
    noisy = oracle_service.make_iid_flip(thresholds.hclass, thresholds.marginal, 6, 0.08)
    wins = sum(
        tournament_service.tournament(
            thresholds.hclass, thresholds.marginal, noisy, candidates, 0.08, 0.1, np.random.default_rng(seed),
        ).winner == 6
        for seed in range(50)
    )
    print(f"   ✓ t=6 won {wins}/50 seeded tournaments")

    print("\n" + "=" * 60)
    print("ALL TESTS PASSED! ✓")
    print("=" * 60)
