"""
Label model data types.

The joint distribution D is a per-point table p1(x) = Pr[y = 1 | x] paired
with the marginal D_X. Queries are i.i.d. draws from that table.
"""

from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from app.models.hypothesis import Marginal


class OracleError(Exception):
    """Invalid oracle parameters or infeasible adversary budget."""
    pass


ORACLE_KINDS = ('realizable', 'iid_flip', 'g_adversary', 'figure1', 'explicit_table')


@dataclass(frozen=True, eq=False)
class LabelModel:
    """
    Conditional label table.

    Usage:
        model.p1[x]   # Pr[y = 1 | x]
    """
    p1: np.ndarray
    marginal: Marginal
    kind: str = 'explicit_table'
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        p1 = np.asarray(self.p1, dtype=np.float64)

        if p1.ndim != 1 or p1.size != self.marginal.n:
            raise OracleError(f"Label table has shape {p1.shape}, marginal has {self.marginal.n} points")
        if np.any(p1 < 0) or np.any(p1 > 1) or not np.all(np.isfinite(p1)):
            raise OracleError("Label probabilities must lie in [0, 1]")
        if self.kind not in ORACLE_KINDS:
            raise OracleError(f"Unknown oracle kind '{self.kind}'. Must be one of: {', '.join(ORACLE_KINDS)}")

        p1 = p1.copy()
        p1.setflags(write=False)
        object.__setattr__(self, 'p1', p1)


@dataclass(frozen=True)
class NoiseBudgetReport:
    """Best hypothesis h* and its exact error eta*."""
    best: int
    error: float
