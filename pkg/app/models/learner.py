"""
Learner, tournament and trace data types.

Indices in RunRecord, TraceRow and DuelOutcome are rows of the hypothesis
class. LearnerState works in packing positions (0..|H'|-1); the learner
translates when it writes the record.
"""

import math
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


MODES = ('fixed_rounds', 'adaptive')

HEAVY_BALL_THRESHOLD = 0.8
CLAIMED_BALL_WEIGHT = 0.6


class ParamsError(ValueError):
    """Invalid algorithm parameters."""
    pass


@dataclass(frozen=True)
class AlgorithmParams:
    """
    Parameters of one learner run.

    Theory mode enforces the constants of the competitive bound
    (alpha <= 0.2, c4 >= 300, c5 = 1/10, c1 >= 90 c4). Practical mode lets
    c4/c5 be overridden; the overrides are recorded in the run output.
    """
    eta: float
    epsilon: float
    delta: float
    alpha: float = 0.2
    c1: float = 27000.0
    c4: float = 300.0
    c5: float = 0.1
    mode: str = 'fixed_rounds'
    m_hat: float = 1.0
    round_constant: float = 8.0
    theta_stop: Optional[float] = None
    max_rounds: int = 20000
    duel_constant: float = 48.0
    practical: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ('eta', 'epsilon'):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ParamsError(f"{name} must lie in [0, 1], got {value}")
        if not 0 < self.delta < 1:
            raise ParamsError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.alpha <= 0.2:
            raise ParamsError(f"alpha must lie in (0, 0.2], got {self.alpha}")
        if self.mode not in MODES:
            raise ParamsError(f"mode must be one of {MODES}, got '{self.mode}'")
        if self.m_hat <= 0 or self.round_constant <= 0 or self.duel_constant <= 0:
            raise ParamsError("m_hat, round_constant and duel_constant must be > 0")
        if self.max_rounds < 1:
            raise ParamsError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.c4 <= 0 or self.c5 < 0:
            raise ParamsError(f"c4 must be > 0 and c5 >= 0, got c4={self.c4} c5={self.c5}")

        if not self.practical:
            if self.c4 < 300:
                raise ParamsError(f"theory mode needs c4 >= 300, got {self.c4}")
            if not math.isclose(self.c5, 0.1):
                raise ParamsError(f"theory mode needs c5 = 0.1, got {self.c5}")
            if self.c1 < 90 * self.c4:
                raise ParamsError(f"theory mode needs c1 >= 90*c4 = {90 * self.c4}, got {self.c1}")

    @property
    def kappa(self) -> float:
        """Penalty coefficient (c4/20)*eta of the query objective."""
        return self.c4 / 20.0 * self.eta

    @property
    def radius_detect(self) -> float:
        return self.c4 * self.eta + self.c5 * self.epsilon

    @property
    def radius_add(self) -> float:
        return 3.0 * self.radius_detect

    @property
    def eta_tilde(self) -> float:
        """Error bound of the best center, used as the stage-two duel scale."""
        return (3.0 + 3.0 * self.c4) * self.eta + 3.0 * self.c5 * self.epsilon

    def round_budget(self, n_packed: int) -> int:
        """k = ceil(c_k * m_hat * ln(|H'|/delta)) for fixed mode."""
        return max(1, math.ceil(self.round_constant * self.m_hat * math.log(n_packed / self.delta)))

    def stop_threshold(self, n_packed: int) -> float:
        """Adaptive-mode threshold on the accumulated objective."""
        if self.theta_stop is not None:
            return self.theta_stop
        return 2.0 * math.log(n_packed) + math.log(1.0 / self.delta)

    def overrides(self) -> Dict[str, float]:
        """Constants that differ from the theory defaults."""
        defaults = {'c1': 27000.0, 'c4': 300.0, 'c5': 0.1}
        return {
            name: getattr(self, name)
            for name, value in defaults.items()
            if not math.isclose(getattr(self, name), value)
        }

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class QueryPlan:
    """
    Solved query distribution q*.

    support holds point indices in ascending order and masses the matching
    q(x); q(x)/D_X(x) is the same constant 1/support_mass on the support.
    """
    support: Tuple[int, ...]
    masses: Tuple[float, ...]
    threshold: float
    objective: float
    support_mass: float
    degenerate: bool = False

    @property
    def max_ratio(self) -> float:
        """max_x q(x)/D_X(x)."""
        return 1.0 / self.support_mass

    def as_vector(self, n_points: int) -> np.ndarray:
        q = np.zeros(n_points)
        q[list(self.support)] = self.masses
        return q


@dataclass
class LearnerState:
    """
    Evolving state of stage one.

    log_weights = initial_log_weights - alpha * mistakes, kept in log space
    so long runs never underflow.
    """
    log_weights: np.ndarray
    initial_log_weights: np.ndarray
    mistakes: np.ndarray
    capped: np.ndarray
    centers: List[int] = field(default_factory=list)
    iteration: int = 0
    tau_sum: float = 0.0
    events: List[Dict[str, Any]] = field(default_factory=list)

    @classmethod
    def start(cls, n_packed: int, initial_weights: Optional[np.ndarray] = None) -> "LearnerState":
        if initial_weights is None:
            initial = np.zeros(n_packed)
        else:
            weights = np.asarray(initial_weights, dtype=np.float64)
            if weights.shape != (n_packed,) or np.any(weights <= 0):
                raise ParamsError(f"initial weights must be {n_packed} positive numbers")
            initial = np.log(weights)

        return cls(
            log_weights=initial.copy(),
            initial_log_weights=initial.copy(),
            mistakes=np.zeros(n_packed, dtype=np.int64),
            capped=np.zeros(n_packed, dtype=bool),
        )

    @property
    def n_packed(self) -> int:
        return int(self.log_weights.size)

    def covers_everything(self) -> bool:
        return bool(self.capped.all())


@dataclass(frozen=True)
class TraceRow:
    """One stage-one query."""
    iteration: int
    x: int
    y: int
    tau: float
    s_size: int
    c_size: int
    heavy: bool
    center: int = -1
    added: Tuple[int, ...] = ()
    support_size: int = 0
    degenerate_plan: bool = False
    phi: Optional[float] = None


@dataclass(frozen=True)
class DuelOutcome:
    """Result of one stage-two duel on the disagreement region of (h, h2)."""
    h: int
    h2: int
    n: int
    mistakes_h: int
    mistakes_h2: int
    eliminated: int

    @property
    def winner(self) -> int:
        return self.h2 if self.eliminated == self.h else self.h


@dataclass(frozen=True)
class TournamentResult:
    winner: int
    duels: Tuple[DuelOutcome, ...]
    samples_per_duel: int

    @property
    def queries(self) -> int:
        return sum(duel.n for duel in self.duels)


@dataclass
class RunRecord:
    """Outcome of one learner run: final hypothesis, query counts, trace."""
    final_hypothesis: int
    stage1_queries: int
    stage2_queries: int
    centers: List[int]
    packing: Tuple[int, ...]
    trace: List[TraceRow]
    duels: List[DuelOutcome]
    params: AlgorithmParams
    initial_log_weights: np.ndarray
    tau_sum: float
    stop_reason: str
    flags: List[str] = field(default_factory=list)

    @property
    def total_queries(self) -> int:
        return self.stage1_queries + self.stage2_queries

    @property
    def flagged(self) -> bool:
        return bool(self.flags)


@dataclass(frozen=True)
class ReplayStep:
    """
    Learner state at one queried iteration, rebuilt from a RunRecord.

    Arrays are indexed by packing position; capped is S_i (after the
    heavy-ball step), log_weights are the weights before the update.
    """
    iteration: int
    log_weights: np.ndarray
    capped: np.ndarray
    lam: np.ndarray
    lam_bar: np.ndarray
    plan: QueryPlan
    x: int
    y: int


@dataclass(frozen=True)
class PotentialTrace:
    """
    Potential diagnostics for a known h*.

    phi[i], delta[i], in_s[i] and posterior[i] describe the i-th queried
    iteration; psi[k] = sum(delta[:k]), so psi has one more entry.
    """
    h_star: int
    tracked: int
    alpha: float
    phi0: float
    phi: Tuple[float, ...]
    delta: Tuple[float, ...]
    psi: Tuple[float, ...]
    in_s: Tuple[bool, ...]
    posterior: Tuple[float, ...]
    final_posterior: float
    substituted: bool = False

    @property
    def max_abs_delta(self) -> float:
        return max((abs(d) for d in self.delta), default=0.0)

    @property
    def steps_above_alpha(self) -> int:
        """Iterations whose |delta| exceeds alpha (each term alone stays within alpha)."""
        return sum(1 for d in self.delta if abs(d) > self.alpha + 1e-12)

    @property
    def posterior_path(self) -> Tuple[float, ...]:
        """lambda(h*) before every query, then after the last one."""
        return self.posterior + (self.final_posterior,)
