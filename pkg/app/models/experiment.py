"""
Run and sweep configuration types.

Both are parsed from JSON files by the storage service. An instance spec is
either a path to an instance file or a generator invocation
({"generator": "thresholds", "n": 100}); an oracle spec is a kind tag plus
parameters ({"kind": "iid_flip", "h_star": 50, "rho": 0.01}).
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple


BASELINE_KINDS = ('passive_erm', 'greedy_split', 'uniform_disagreement')


@dataclass(frozen=True)
class RunConfig:
    instance: Any
    oracle: Dict[str, Any]
    params: Dict[str, Any]
    seed: int = 0
    output: Optional[str] = None
    initial_weights: Optional[Tuple[float, ...]] = None
    check_invariants: bool = False


@dataclass(frozen=True)
class Variant:
    """
    One sweep cell. Keys present here override the sweep-level
    instance/oracle/params.
    """
    name: str
    params: Dict[str, Any] = field(default_factory=dict)
    instance: Optional[Any] = None
    oracle: Optional[Dict[str, Any]] = None


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    budget: int


@dataclass(frozen=True)
class BaselineResult:
    kind: str
    hypothesis: int
    queries: int
    flags: Tuple[str, ...] = ()

    @property
    def flagged(self) -> bool:
        return bool(self.flags)


@dataclass(frozen=True)
class SweepConfig:
    """
    Grid of (variant, seed) runs.

    Every row of the sweep is reproducible from (config, seed) alone.
    """
    instance: Any
    oracle: Dict[str, Any]
    params: Dict[str, Any]
    seeds: Tuple[int, int]
    variants: Tuple[Variant, ...]
    baselines: Tuple[BaselineSpec, ...] = ()
    master_seed: int = 0
    workers: int = 1
    output_dir: str = 'results'

    @property
    def seed_list(self) -> List[int]:
        start, stop = self.seeds
        return list(range(start, stop))
