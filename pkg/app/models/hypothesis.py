"""
Hypothesis space data types.

A finite hypothesis class is a dense 0/1 matrix indexed (hypothesis, point).
Row indices are the stable identifiers every other module uses. Arrays are
made read-only on construction so instances can be shared across runs and
worker processes.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


MASS_TOLERANCE = 1e-12


class InstanceError(Exception):
    """Invalid hypothesis class, marginal, index or instance file."""
    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Marginal:
    """
    Distribution D_X over a finite domain.

    Usage:
        marginal = Marginal.uniform(8)
        marginal.masses[3]  # 0.125
    """
    masses: np.ndarray

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=np.float64)

        if masses.ndim != 1 or masses.size < 1:
            raise InstanceError(f"Marginal needs a non-empty 1-d mass vector, got shape {masses.shape}")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise InstanceError("Marginal masses must be finite and >= 0")
        if abs(masses.sum() - 1.0) > MASS_TOLERANCE:
            raise InstanceError(f"Marginal masses sum to {masses.sum():.15f}, expected 1")

        object.__setattr__(self, 'masses', _frozen(masses))

    @classmethod
    def uniform(cls, n: int) -> "Marginal":
        if n < 1:
            raise InstanceError(f"Domain size must be >= 1, got {n}")
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return int(self.masses.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, Marginal) and np.array_equal(self.masses, other.masses)


@dataclass(frozen=True, eq=False)
class HypothesisClass:
    """
    Binary labels of |H| hypotheses over |X| points.

    labels[h, x] is h(x) in {0, 1}.
    """
    labels: np.ndarray
    hypothesis_names: Optional[Tuple[str, ...]] = None
    point_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        labels = np.asarray(self.labels)

        if labels.ndim != 2 or labels.shape[0] < 1 or labels.shape[1] < 1:
            raise InstanceError(f"Hypothesis class needs a non-empty 2-d matrix, got shape {labels.shape}")
        if not np.isin(labels, (0, 1)).all():
            raise InstanceError("Hypothesis labels must be 0 or 1")

        object.__setattr__(self, 'labels', _frozen(labels.astype(np.uint8)))

        if self.hypothesis_names is not None:
            names = tuple(self.hypothesis_names)
            if len(names) != labels.shape[0]:
                raise InstanceError(f"{len(names)} hypothesis names for {labels.shape[0]} hypotheses")
            object.__setattr__(self, 'hypothesis_names', names)

        if self.point_names is not None:
            names = tuple(self.point_names)
            if len(names) != labels.shape[1]:
                raise InstanceError(f"{len(names)} point names for {labels.shape[1]} points")
            object.__setattr__(self, 'point_names', names)

    @property
    def n_hypotheses(self) -> int:
        return int(self.labels.shape[0])

    @property
    def domain_size(self) -> int:
        return int(self.labels.shape[1])

    def check_index(self, h: int) -> int:
        if not 0 <= int(h) < self.n_hypotheses:
            raise InstanceError(f"Hypothesis index {h} out of range [0, {self.n_hypotheses})")
        return int(h)

    def check_point(self, x: int) -> int:
        if not 0 <= int(x) < self.domain_size:
            raise InstanceError(f"Point index {x} out of range [0, {self.domain_size})")
        return int(x)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, HypothesisClass)
            and np.array_equal(self.labels, other.labels)
            and self.hypothesis_names == other.hypothesis_names
            and self.point_names == other.point_names
        )


@dataclass(frozen=True, eq=False)
class Instance:
    """A hypothesis class paired with its marginal."""
    hclass: HypothesisClass
    marginal: Marginal
    name: str = "instance"

    def __post_init__(self):
        if self.hclass.domain_size != self.marginal.n:
            raise InstanceError(
                f"Marginal has {self.marginal.n} points but the class has domain size "
                f"{self.hclass.domain_size}"
            )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Instance)
            and self.hclass == other.hclass
            and self.marginal == other.marginal
        )


@dataclass(frozen=True)
class Packing:
    """
    Maximal packing H' of a class.

    members are row indices of the parent class in admission order;
    every pair of members is more than `radius` apart.
    """
    members: Tuple[int, ...]
    radius: float

    def __len__(self) -> int:
        return len(self.members)

    def position(self, h: int) -> int:
        """Position of class row h inside the packing."""
        try:
            return self.members.index(int(h))
        except ValueError as e:
            raise InstanceError(f"Hypothesis {h} is not a packing member") from e


@dataclass(frozen=True)
class SetCoverInstance:
    """
    Set-cover input (U, S).

    universe holds the element ids; subsets are tuples of element ids.
    known_cover optionally lists subset indices of a cover to verify against.
    """
    universe: Tuple[int, ...]
    subsets: Tuple[Tuple[int, ...], ...]
    known_cover: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        universe = tuple(sorted(set(int(u) for u in self.universe)))
        subsets = tuple(tuple(sorted(set(int(u) for u in s))) for s in self.subsets)

        if not universe:
            raise InstanceError("Set-cover universe is empty")
        for index, subset in enumerate(subsets):
            if not subset:
                raise InstanceError(f"Subset {index} is empty")
            stray = set(subset) - set(universe)
            if stray:
                raise InstanceError(f"Subset {index} has elements outside the universe: {sorted(stray)}")

        covered = set().union(*subsets) if subsets else set()
        uncovered = set(universe) - covered
        if uncovered:
            raise InstanceError(f"Elements not in any subset (no cover exists): {sorted(uncovered)}")

        object.__setattr__(self, 'universe', universe)
        object.__setattr__(self, 'subsets', subsets)


@dataclass(frozen=True)
class ReductionLayout:
    """
    Point/hypothesis layout of the set-cover reduction.

    element_points[k]    point of the k-th universe element
    subset_points[s][j]  point (s, j); bit j of 2f(s,u)+1
    extra_points         the log|U| coordinates D
    element_hypotheses   row of h_u per universe element
    extra_hypotheses     row of h_d per extra coordinate
    zero_hypothesis      row of h_0
    """
    element_points: Tuple[int, ...]
    subset_points: Tuple[Tuple[int, ...], ...]
    extra_points: Tuple[int, ...]
    element_hypotheses: Tuple[int, ...]
    extra_hypotheses: Tuple[int, ...]
    zero_hypothesis: int


@dataclass(frozen=True)
class ReductionInstance:
    """Learning instance built from a set-cover instance, with its parameters."""
    instance: Instance
    setcover: SetCoverInstance
    layout: ReductionLayout
    eta: float
    epsilon: float
    delta: float


@dataclass(frozen=True)
class Figure1Instance:
    """Three-hypothesis example with its suggested prior."""
    instance: Instance
    initial_weights: Tuple[float, ...]
    eta_mass: float
    wrong_heavy: int = 0
    runner_up: int = 1
    truth: int = 2
