"""
Sweep Script - runs a grid of (variant, seed) experiments

Every cell runs the learner plus the configured baselines on one seeded
stream family, recomputes success from the emitted hypotheses and writes:
- <out>/results.csv    one row per (variant, seed, learner)
- <out>/aggregate.csv  success rate and mean/median queries per group

Runs execute in a process pool when workers > 1; rows are re-sorted
afterwards so the tables never depend on scheduling.
"""

import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from app.models.experiment import BaselineSpec, SweepConfig
from app.models.hypothesis import Instance
from app.services.baseline_service import baseline_service
from app.services.learner_service import InvariantViolation, learner_service
from app.services.oracle_service import oracle_service
from app.services.report_service import report_service
from app.services.storage_service import storage_service
from app.utils.rng_utils import run_stream, split
from app.utils.time_utils import Stopwatch, to_iso, utc_now


logger = logging.getLogger(__name__)


def _run_one(task: Dict[str, Any]) -> List[Dict[str, Any]]:
    """
    One (variant, seed) cell: the learner and every baseline.

    Top-level so worker processes can unpickle it. Errors become error
    rows; invariant violations propagate.
    """
    variant, seed = task['variant'], task['seed']
    instance: Instance = task['instance']
    baselines: List[BaselineSpec] = task['baselines']
    raw_params = task['params']

    streams = split(run_stream(task['master_seed'], seed), 1 + len(baselines))
    rows = []

    try:
        model = oracle_service.from_spec(task['oracle'], instance)
        params = storage_service.build_params(raw_params, task['practical'])
    except Exception as e:
        message = f"{type(e).__name__}: {e}"
        logger.error(f"{variant}/seed {seed}: setup failed: {message}")
        rows.append(report_service.error_row(variant, 'learner', seed, message, raw_params))
        return rows

    started_at = to_iso(utc_now())
    try:
        with Stopwatch() as watch:
            record = learner_service.run(
                instance, params, model, streams[0], check_invariants=task['check_invariants'],
            )
        rows.append(report_service.record_to_row(
            record, instance, model, variant, seed, watch.seconds, started_at,
        ))
        if record.flagged:
            logger.warning(f"{variant}/seed {seed}: run flagged {record.flags}")
    except InvariantViolation:
        raise
    except Exception as e:
        message = f"{type(e).__name__}: {e}"
        logger.error(f"{variant}/seed {seed}: learner failed: {message}", exc_info=True)
        rows.append(report_service.error_row(variant, 'learner', seed, message, raw_params))

    for spec, stream in zip(baselines, streams[1:]):
        started_at = to_iso(utc_now())
        try:
            with Stopwatch() as watch:
                result = baseline_service.run_baseline(spec.kind, instance, model, spec.budget, stream)
            rows.append(report_service.baseline_to_row(
                result, instance, model, variant, seed, params.epsilon, params.eta,
                watch.seconds, started_at,
            ))
        except Exception as e:
            message = f"{type(e).__name__}: {e}"
            logger.error(f"{variant}/seed {seed}: {spec.kind} failed: {message}")
            rows.append(report_service.error_row(variant, spec.kind, seed, message, raw_params))

    return rows


class SweepRunner:
    """Orchestrates a sweep from a SweepConfig."""

    def __init__(
        self,
        sweep: SweepConfig,
        base_dir: str = '.',
        workers: Optional[int] = None,
        output_dir: Optional[str] = None,
        practical: Optional[bool] = None,
        check_invariants: bool = False,
    ):
        self.sweep = sweep
        self.base_dir = base_dir
        self.workers = workers or sweep.workers
        self.output_dir = Path(output_dir or sweep.output_dir)
        self.practical = practical
        self.check_invariants = check_invariants

        self.stats = {
            'total_runs': 0,
            'failed_runs': 0,
            'successful_runs': 0,
            'start_time': None,
            'end_time': None,
        }

        logger.info(f"SweepRunner initialized: {len(sweep.variants)} variants x {len(sweep.seed_list)} seeds")

    def build_tasks(self) -> List[Dict[str, Any]]:
        """Expand the grid; instances are resolved once per variant."""
        shared = storage_service.resolve_instance(self.sweep.instance, self.base_dir)
        tasks = []

        for variant in self.sweep.variants:
            instance = shared
            if variant.instance is not None:
                instance = storage_service.resolve_instance(variant.instance, self.base_dir)

            params = {**self.sweep.params, **variant.params}
            for seed in self.sweep.seed_list:
                tasks.append({
                    'variant': variant.name,
                    'seed': seed,
                    'instance': instance,
                    'oracle': variant.oracle or self.sweep.oracle,
                    'params': params,
                    'practical': self.practical,
                    'baselines': list(self.sweep.baselines),
                    'master_seed': self.sweep.master_seed,
                    'check_invariants': self.check_invariants,
                })
        return tasks

    def run(self) -> pd.DataFrame:
        """Execute the sweep and write both tables."""
        self.stats['start_time'] = utc_now()

        print("\n" + "#" * 60)
        print("# PARAMETER SWEEP")
        print("#" * 60)

        tasks = self.build_tasks()
        self.stats['total_runs'] = len(tasks)

        print("\n" + "=" * 60)
        print("CONFIGURATION")
        print("=" * 60)
        print(f"Variants: {len(self.sweep.variants)}")
        for variant in self.sweep.variants:
            print(f"  - {variant.name} {variant.params or ''}")
        print(f"Seeds: [{self.sweep.seeds[0]}, {self.sweep.seeds[1]})")
        print(f"Baselines: {', '.join(b.kind for b in self.sweep.baselines) or 'none'}")
        print(f"Workers: {self.workers}")
        print("=" * 60)

        if self.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                batches = list(pool.map(_run_one, tasks))
        else:
            batches = [_run_one(task) for task in tasks]

        rows = [row for batch in batches for row in batch]
        learner_rows = [row for row in rows if row['learner'] == 'learner']
        self.stats['failed_runs'] = sum(1 for row in learner_rows if row['error'])
        self.stats['successful_runs'] = sum(1 for row in learner_rows if row['success'])

        results = report_service.to_frame(rows)
        if not results.empty:
            results = results.sort_values(['variant', 'seed', 'learner'], kind='stable').reset_index(drop=True)
        aggregate = report_service.aggregate(results)

        storage_service.write_table(results, self.output_dir / 'results.csv')
        storage_service.write_table(aggregate, self.output_dir / 'aggregate.csv')

        self.stats['end_time'] = utc_now()
        self.print_summary(aggregate)
        return results

    def print_summary(self, aggregate: pd.DataFrame):
        """Print summary report."""
        duration = (self.stats['end_time'] - self.stats['start_time']).total_seconds()

        print("\n" + "=" * 60)
        print("SWEEP SUMMARY REPORT")
        print("=" * 60)

        if aggregate.empty:
            print("\n(no runs)")
        else:
            print("\nPER-VARIANT RESULTS:")
            print("-" * 60)
            for _, row in aggregate.iterrows():
                print(f"{row['variant']} / {row['learner']} (eps={row['epsilon']})")
                print(f"  Runs: {row['runs']}  errors: {row['errors']}")
                print(f"  Success rate: {row['success_rate']:.3f}")
                print(f"  Queries: mean {row['mean_queries']:.1f}, median {row['median_queries']:.1f}")
                print()

        print("=" * 60)
        print("OVERALL STATISTICS")
        print("=" * 60)
        print(f"Learner runs: {self.stats['total_runs']}")
        print(f"Successful: {self.stats['successful_runs']}")
        print(f"Errored: {self.stats['failed_runs']}")
        print(f"Output: {self.output_dir}")
        print(f"Duration: {duration:.1f}s")
        print("=" * 60)

        if self.stats['failed_runs'] == 0:
            print("\n✅ SWEEP COMPLETED")
        else:
            print(f"\n⚠️  COMPLETED WITH {self.stats['failed_runs']} ERRORED RUNS")

        print("=" * 60 + "\n")


def run_sweep(
    config_path: str,
    workers: Optional[int] = None,
    output_dir: Optional[str] = None,
    practical: Optional[bool] = None,
    check_invariants: bool = False,
) -> pd.DataFrame:
    """
    Load a sweep config file and run it.

    Relative instance paths resolve against the config's directory.

    Raises:
        ConfigError: unreadable or malformed config (with line number)
        InvariantViolation: an instrumented run broke an invariant
    """
    sweep = storage_service.load_sweep_config(config_path)
    runner = SweepRunner(
        sweep,
        base_dir=str(Path(config_path).parent),
        workers=workers,
        output_dir=output_dir,
        practical=practical,
        check_invariants=check_invariants,
    )
    return runner.run()


def main():
    """Standalone entry point: python -m app.scripts.sweep <config.json>"""
    if len(sys.argv) != 2:
        print("Usage: python -m app.scripts.sweep <sweep-config.json>")
        sys.exit(1)

    from app.scripts.cli import main as cli_main
    sys.exit(cli_main(['sweep', '--config', sys.argv[1]]))


if __name__ == "__main__":
    main()
