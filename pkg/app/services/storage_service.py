"""
Storage Service for instances, configs and run outputs

Handles ALL file I/O of the simulator:
- Instance JSON files (bit-exact round trip)
- Run / sweep config JSON files (parse errors carry the line number)
- Set-cover text files
- Run logs: summary JSON + per-iteration trace CSV
- Sweep result tables (CSV via pandas)

Every write goes through atomic_write, so an interrupted sweep never
leaves a half-written file behind.
"""

import json
import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from app.models.experiment import BASELINE_KINDS, BaselineSpec, RunConfig, SweepConfig, Variant
from app.models.hypothesis import HypothesisClass, Instance, InstanceError, Marginal, SetCoverInstance
from app.models.learner import AlgorithmParams, RunRecord
from app.services.instance_service import instance_service
from app.utils.config import config
from app.utils.time_utils import to_iso, utc_now


logger = logging.getLogger(__name__)


PathLike = Union[str, Path]

RUN_KEYS = {'instance', 'oracle', 'params', 'mode', 'seed', 'output', 'initial_weights', 'check_invariants'}
SWEEP_KEYS = {'instance', 'oracle', 'params', 'mode', 'seeds', 'variants', 'baselines',
              'master_seed', 'workers', 'output_dir'}
PARAM_KEYS = {'eta', 'epsilon', 'delta', 'alpha', 'c1', 'c4', 'c5', 'mode', 'm_hat', 'round_constant',
              'theta_stop', 'max_rounds', 'duel_constant', 'practical'}

TRACE_COLUMNS = ['iteration', 'x', 'y', 'tau', 's_size', 'c_size', 'heavy', 'center', 'added',
                 'support_size', 'degenerate_plan', 'phi']


class ConfigError(Exception):
    """Malformed run or sweep config; carries the file path and line."""

    def __init__(self, message: str, path: Optional[PathLike] = None, line: Optional[int] = None):
        self.path = str(path) if path is not None else None
        self.line = line
        location = ''
        if self.path:
            location = f"{self.path}:{line}: " if line is not None else f"{self.path}: "
        super().__init__(f"{location}{message}")


class StorageService:
    """
    Usage:
        from app.services.storage_service import storage_service

        storage_service.save_instance(instance, 'thresholds.json')
        instance = storage_service.load_instance('thresholds.json')
        run_config = storage_service.load_run_config('run.json')
    """

    @contextmanager
    def atomic_write(self, path: PathLike, mode: str = 'w'):
        """
        Context manager for a file that appears only when complete.

        Usage:
            with self.atomic_write('out.json') as handle:
                handle.write(text)

        Yields:
            Open handle of a temporary file next to `path`
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix='.tmp')
        try:
            with os.fdopen(fd, mode, newline='' if 'b' not in mode else None) as handle:
                yield handle
            os.replace(tmp, path)
            logger.debug(f"Wrote {path}")
        except Exception:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise

    # ------------------------------------------------------------------
    # Instances
    # ------------------------------------------------------------------

    def instance_to_dict(self, instance: Instance) -> Dict[str, Any]:
        hclass = instance.hclass
        document = {
            'name': instance.name,
            'domain_size': hclass.domain_size,
            'masses': [float(m) for m in instance.marginal.masses],
            'hypotheses': [''.join(str(int(v)) for v in row) for row in hclass.labels],
        }
        if hclass.hypothesis_names is not None:
            document['hypothesis_names'] = list(hclass.hypothesis_names)
        if hclass.point_names is not None:
            document['point_names'] = list(hclass.point_names)
        return document

    def instance_from_dict(self, document: Dict[str, Any]) -> Instance:
        """
        Raises:
            InstanceError: Missing keys, bad label strings or size mismatch
        """
        try:
            domain_size = int(document['domain_size'])
            rows = document['hypotheses']
            masses = np.asarray(document['masses'], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as e:
            raise InstanceError(f"Instance document is missing or has a bad field: {e}") from e

        for index, row in enumerate(rows):
            if len(row) != domain_size or set(row) - {'0', '1'}:
                raise InstanceError(f"Hypothesis {index} is not a {domain_size}-character 0/1 string")

        labels = np.array([[int(c) for c in row] for row in rows], dtype=np.uint8).reshape(len(rows), domain_size)
        names = document.get('hypothesis_names')
        points = document.get('point_names')

        return Instance(
            hclass=HypothesisClass(
                labels,
                hypothesis_names=tuple(names) if names is not None else None,
                point_names=tuple(points) if points is not None else None,
            ),
            marginal=Marginal(masses),
            name=document.get('name', 'instance'),
        )

    def save_instance(self, instance: Instance, path: PathLike) -> Path:
        """Write the instance JSON document; masses round-trip bit-exactly."""
        with self.atomic_write(path) as handle:
            json.dump(self.instance_to_dict(instance), handle, indent=2)
            handle.write('\n')
        logger.info(f"Saved instance {instance.name} ({instance.hclass.n_hypotheses}x{instance.hclass.domain_size}) to {path}")
        return Path(path)

    def load_instance(self, path: PathLike) -> Instance:
        """
        Raises:
            InstanceError: Unreadable or malformed instance file
        """
        try:
            with open(path) as handle:
                document = json.load(handle)
        except json.JSONDecodeError as e:
            raise InstanceError(f"{path}:{e.lineno}: invalid JSON ({e.msg})") from e
        except OSError as e:
            raise InstanceError(f"Cannot read instance file {path}: {e}") from e

        return self.instance_from_dict(document)

    def load_setcover(self, path: PathLike) -> SetCoverInstance:
        with open(path) as handle:
            return instance_service.parse_setcover(handle.read())

    def resolve_instance(self, spec: Any, base_dir: PathLike = '.') -> Instance:
        """
        Instance from a config value: a path to an instance file, or a
        generator invocation. A set-cover invocation may name a 'file'.
        """
        base_dir = Path(base_dir)
        if isinstance(spec, str):
            return self.load_instance(base_dir / spec)
        if not isinstance(spec, dict):
            raise InstanceError(f"Instance spec must be a path or an object, got {type(spec).__name__}")

        if 'path' in spec:
            return self.load_instance(base_dir / spec['path'])
        if spec.get('generator') == 'setcover' and 'file' in spec:
            sc = self.load_setcover(base_dir / spec['file'])
            return instance_service.gen_setcover_reduction(sc).instance
        return instance_service.from_spec(spec)

    # ------------------------------------------------------------------
    # Configs
    # ------------------------------------------------------------------

    def _read_json(self, path: PathLike) -> Dict[str, Any]:
        try:
            with open(path) as handle:
                document = json.load(handle)
        except json.JSONDecodeError as e:
            logger.error(f"Config parse error in {path} at line {e.lineno}: {e.msg}")
            raise ConfigError(e.msg, path, e.lineno) from e
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}", path) from e

        if not isinstance(document, dict):
            raise ConfigError("top level must be a JSON object", path, 1)
        return document

    def _check_keys(self, document: Dict[str, Any], allowed: set, path: PathLike, what: str):
        unknown = set(document) - allowed
        if unknown:
            raise ConfigError(f"unknown {what} keys: {', '.join(sorted(unknown))}", path)

    def _merged_params(self, document: Dict[str, Any], path: PathLike) -> Dict[str, Any]:
        params = dict(document.get('params', {}))
        if 'mode' in document:
            params['mode'] = document['mode']
        self._check_keys(params, PARAM_KEYS, path, 'params')
        for required in ('eta', 'epsilon', 'delta'):
            if required not in params:
                raise ConfigError(f"params.{required} is required", path)
        return params

    def load_run_config(self, path: PathLike) -> RunConfig:
        """
        Raises:
            ConfigError: Invalid JSON (with line number), unknown or missing keys
        """
        document = self._read_json(path)
        self._check_keys(document, RUN_KEYS, path, 'run config')
        for required in ('instance', 'oracle'):
            if required not in document:
                raise ConfigError(f"'{required}' is required", path)

        weights = document.get('initial_weights')
        return RunConfig(
            instance=document['instance'],
            oracle=document['oracle'],
            params=self._merged_params(document, path),
            seed=int(document.get('seed', config.DEFAULT_SEED)),
            output=document.get('output'),
            initial_weights=tuple(float(w) for w in weights) if weights is not None else None,
            check_invariants=bool(document.get('check_invariants', False)),
        )

    def load_sweep_config(self, path: PathLike) -> SweepConfig:
        """
        Raises:
            ConfigError: Invalid JSON (with line number), unknown keys, bad seeds/variants/baselines
        """
        document = self._read_json(path)
        self._check_keys(document, SWEEP_KEYS, path, 'sweep config')
        for required in ('instance', 'oracle', 'seeds'):
            if required not in document:
                raise ConfigError(f"'{required}' is required", path)

        seeds = document['seeds']
        if not (isinstance(seeds, list) and len(seeds) == 2 and all(isinstance(s, int) for s in seeds)):
            raise ConfigError("'seeds' must be [start, stop]", path)

        variants = []
        for index, raw in enumerate(document.get('variants') or [{'name': 'default'}]):
            if 'name' not in raw:
                raise ConfigError(f"variant {index} has no 'name'", path)
            self._check_keys(raw.get('params', {}), PARAM_KEYS, path, f"variant '{raw['name']}' params")
            variants.append(Variant(
                name=raw['name'],
                params=dict(raw.get('params', {})),
                instance=raw.get('instance'),
                oracle=raw.get('oracle'),
            ))

        baselines = []
        for raw in document.get('baselines', []):
            if raw.get('kind') not in BASELINE_KINDS:
                raise ConfigError(f"unknown baseline kind '{raw.get('kind')}'", path)
            baselines.append(BaselineSpec(kind=raw['kind'], budget=int(raw.get('budget', 0))))

        return SweepConfig(
            instance=document['instance'],
            oracle=document['oracle'],
            params=self._merged_params(document, path),
            seeds=(seeds[0], seeds[1]),
            variants=tuple(variants),
            baselines=tuple(baselines),
            master_seed=int(document.get('master_seed', config.DEFAULT_SEED)),
            workers=int(document.get('workers', config.SWEEP_WORKERS)),
            output_dir=document.get('output_dir', config.OUTPUT_DIR),
        )

    def build_params(self, raw: Dict[str, Any], practical: Optional[bool] = None) -> AlgorithmParams:
        """
        AlgorithmParams from a params dict, filling unset constants from
        the process config. `practical` overrides the dict and CONSTANTS_MODE.
        """
        values = dict(raw)
        if practical is not None:
            values['practical'] = practical
        values.setdefault('practical', config.is_practical())

        if values['practical']:
            c4, c5 = config.algorithm_constants(True)
            values.setdefault('c4', c4)
            values.setdefault('c5', c5)
        values.setdefault('round_constant', config.ROUND_CONSTANT)
        values.setdefault('duel_constant', config.DUEL_CONSTANT)
        values.setdefault('max_rounds', config.MAX_ROUNDS)

        return AlgorithmParams(**values)

    # ------------------------------------------------------------------
    # Outputs
    # ------------------------------------------------------------------

    def trace_frame(self, record: RunRecord, phi=None) -> pd.DataFrame:
        rows = []
        for index, row in enumerate(record.trace):
            rows.append({
                'iteration': row.iteration,
                'x': row.x,
                'y': row.y,
                'tau': row.tau,
                's_size': row.s_size,
                'c_size': row.c_size,
                'heavy': row.heavy,
                'center': row.center,
                'added': ' '.join(str(h) for h in row.added),
                'support_size': row.support_size,
                'degenerate_plan': row.degenerate_plan,
                'phi': phi[index] if phi is not None else row.phi,
            })
        return pd.DataFrame(rows, columns=TRACE_COLUMNS)

    def write_run_record(
        self,
        record: RunRecord,
        path: PathLike,
        summary: Optional[Dict[str, Any]] = None,
        phi=None,
    ) -> Dict[str, Path]:
        """
        Write <path> (summary JSON) and <stem>_trace.csv next to it.

        Returns:
            {'summary': Path, 'trace': Path}
        """
        path = Path(path)
        trace_path = path.with_name(f"{path.stem}_trace.csv")

        document = {
            'written_at': to_iso(utc_now()),
            'final_hypothesis': record.final_hypothesis,
            'stage1_queries': record.stage1_queries,
            'stage2_queries': record.stage2_queries,
            'total_queries': record.total_queries,
            'centers': record.centers,
            'packing_size': len(record.packing),
            'tau_sum': record.tau_sum,
            'stop_reason': record.stop_reason,
            'flags': record.flags,
            'params': record.params.to_dict(),
            'overrides': record.params.overrides(),
            'duels': [
                {'h': d.h, 'h2': d.h2, 'n': d.n, 'mistakes_h': d.mistakes_h,
                 'mistakes_h2': d.mistakes_h2, 'eliminated': d.eliminated}
                for d in record.duels
            ],
        }
        document.update(summary or {})

        with self.atomic_write(path) as handle:
            json.dump(document, handle, indent=2)
            handle.write('\n')
        with self.atomic_write(trace_path) as handle:
            self.trace_frame(record, phi).to_csv(handle, index=False)

        logger.info(f"Run log written to {path} ({len(record.trace)} trace rows)")
        return {'summary': path, 'trace': trace_path}

    def write_table(self, frame: pd.DataFrame, path: PathLike) -> Path:
        with self.atomic_write(path) as handle:
            frame.to_csv(handle, index=False)
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return Path(path)

    def read_table(self, path: PathLike) -> pd.DataFrame:
        return pd.read_csv(path)


# Singleton instance
storage_service = StorageService()
