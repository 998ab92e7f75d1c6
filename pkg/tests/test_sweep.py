"""Sweep runner: tables, determinism, parallel workers."""

import json

import pandas as pd
import pytest

from app.models.experiment import BaselineSpec, SweepConfig, Variant
from app.scripts.sweep import SweepRunner, run_sweep
from app.services.learner_service import InvariantViolation, learner_service
from app.services.instance_service import instance_service
from app.services.report_service import NONDETERMINISTIC_COLUMNS, RESULT_COLUMNS
from app.services.storage_service import storage_service


def _sweep(seeds=(0, 3), **overrides):
    values = dict(
        instance={'generator': 'thresholds', 'n': 8},
        oracle={'kind': 'iid_flip', 'h_star': 3, 'rho': 0.02},
        params={'eta': 0.02, 'epsilon': 0.1, 'delta': 0.1, 'practical': True, 'm_hat': 2},
        seeds=seeds,
        variants=(Variant('small'), Variant('large', params={'m_hat': 4})),
        baselines=(BaselineSpec('greedy_split', 10), BaselineSpec('passive_erm', 40)),
        master_seed=11,
    )
    values.update(overrides)
    return SweepConfig(**values)


def _deterministic(frame: pd.DataFrame) -> pd.DataFrame:
    return frame.drop(columns=NONDETERMINISTIC_COLUMNS)


class TestSweepRunner:

    def test_tables_are_written(self, tmp_path):
        results = SweepRunner(_sweep(), output_dir=str(tmp_path)).run()

        assert len(results) == 2 * 3 * 3
        assert list(results.columns) == RESULT_COLUMNS
        assert (tmp_path / 'results.csv').exists()
        aggregate = pd.read_csv(tmp_path / 'aggregate.csv')
        assert len(aggregate) == 2 * 3
        assert set(aggregate['learner']) == {'learner', 'greedy_split', 'passive_erm'}

    def test_rows_are_sorted(self, tmp_path):
        results = SweepRunner(_sweep(), output_dir=str(tmp_path)).run()
        keys = list(zip(results['variant'], results['seed'], results['learner']))
        assert keys == sorted(keys)

    def test_same_config_same_table(self, tmp_path):
        first = SweepRunner(_sweep(), output_dir=str(tmp_path / 'a')).run()
        second = SweepRunner(_sweep(), output_dir=str(tmp_path / 'b')).run()
        pd.testing.assert_frame_equal(_deterministic(first), _deterministic(second))

    def test_workers_do_not_change_results(self, tmp_path):
        serial = SweepRunner(_sweep(), output_dir=str(tmp_path / 'serial'), workers=1).run()
        parallel = SweepRunner(_sweep(), output_dir=str(tmp_path / 'parallel'), workers=2).run()
        pd.testing.assert_frame_equal(_deterministic(serial), _deterministic(parallel))

    def test_empty_seed_range_writes_headers(self, tmp_path):
        results = SweepRunner(_sweep(seeds=(0, 0)), output_dir=str(tmp_path)).run()
        assert results.empty
        header = (tmp_path / 'results.csv').read_text().splitlines()
        assert header == [','.join(RESULT_COLUMNS)]

    def test_bad_oracle_becomes_error_rows(self, tmp_path):
        sweep = _sweep(variants=(Variant('broken', oracle={'kind': 'psychic'}),), baselines=())
        results = SweepRunner(sweep, output_dir=str(tmp_path)).run()

        assert len(results) == 3
        assert results['error'].str.contains('Unknown oracle kind').all()
        assert not results['success'].any()

    def test_bad_params_become_error_rows(self, tmp_path):
        sweep = _sweep(variants=(Variant('broken', params={'delta': 2.0}),), baselines=())
        results = SweepRunner(sweep, output_dir=str(tmp_path)).run()
        assert results['error'].str.contains('ParamsError').all()

    def test_invariant_violation_aborts(self, tmp_path, monkeypatch):
        def violate(*args, **kwargs):
            raise InvariantViolation('weights drifted')

        monkeypatch.setattr(learner_service, 'run', violate)
        with pytest.raises(InvariantViolation):
            SweepRunner(_sweep(), output_dir=str(tmp_path)).run()


class TestRunSweep:

    def test_instance_paths_resolve_next_to_config(self, tmp_path):
        storage_service.save_instance(instance_service.gen_thresholds(8), tmp_path / 'thr8.json')
        config_path = tmp_path / 'sweep.json'
        config_path.write_text(json.dumps({
            'instance': 'thr8.json',
            'oracle': {'kind': 'realizable', 'h_star': 2},
            'params': {'eta': 0.0, 'epsilon': 0.1, 'delta': 0.1, 'practical': True, 'm_hat': 2},
            'seeds': [0, 2],
            'variants': [{'name': 'base'}],
        }))

        results = run_sweep(str(config_path), output_dir=str(tmp_path / 'out'))

        assert len(results) == 2
        assert results['error'].eq('').all()
        assert (tmp_path / 'out' / 'aggregate.csv').exists()
