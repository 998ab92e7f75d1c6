"""
Report Service for sweep results

Turns learner / baseline outcomes into result rows and aggregates them.

Key jobs:
- Build one result row per (variant, seed, learner)
- Recompute the success flag from the emitted hypothesis (never trusted
  from the run): true_error(h_hat) <= eta* + epsilon
- Validate rows before they are written
- Aggregate success rate and mean/median queries per (variant, learner)
- Growth ratio of median queries when epsilon shrinks

Critical details:
- eta* is the exact best-in-class error of the oracle
- wall_seconds and started_at are the only non-deterministic columns
"""

import logging
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from app.models.experiment import BaselineResult
from app.models.hypothesis import Instance
from app.models.labels import LabelModel
from app.models.learner import RunRecord
from app.services.oracle_service import oracle_service
from app.utils.time_utils import parse_iso


logger = logging.getLogger(__name__)


RESULT_COLUMNS = [
    'variant', 'learner', 'seed', 'epsilon', 'eta', 'final_hypothesis',
    'stage1_queries', 'stage2_queries', 'total_queries',
    'true_error', 'best_error', 'success', 'flags', 'error',
    'wall_seconds', 'started_at',
]

NONDETERMINISTIC_COLUMNS = ['wall_seconds', 'started_at']

AGGREGATE_COLUMNS = [
    'variant', 'learner', 'epsilon', 'runs', 'errors', 'success_rate',
    'mean_queries', 'median_queries',
]

SUCCESS_TOLERANCE = 1e-12


class ReportValidationError(Exception):
    """Malformed result row."""
    pass


class ReportService:
    """
    Usage:
        from app.services.report_service import report_service

        row = report_service.record_to_row(record, instance, model, 'eps=0.01', seed=3)
        table = report_service.aggregate(results)
    """

    def success(self, instance: Instance, model: LabelModel, h_hat: int, epsilon: float) -> Dict[str, Any]:
        """
        Exact success check of an emitted hypothesis.

        Returns:
            {'true_error', 'best_error', 'success'}
        """
        error = oracle_service.true_error(model, instance.hclass, instance.marginal, h_hat)
        best = oracle_service.best_hypothesis(model, instance.hclass, instance.marginal)
        return {
            'true_error': error,
            'best_error': best.error,
            'success': bool(error <= best.error + epsilon + SUCCESS_TOLERANCE),
        }

    def record_to_row(
        self,
        record: RunRecord,
        instance: Instance,
        model: LabelModel,
        variant: str,
        seed: int,
        wall_seconds: float = 0.0,
        started_at: str = '',
    ) -> Dict[str, Any]:
        row = {
            'variant': variant,
            'learner': 'learner',
            'seed': seed,
            'epsilon': record.params.epsilon,
            'eta': record.params.eta,
            'final_hypothesis': record.final_hypothesis,
            'stage1_queries': record.stage1_queries,
            'stage2_queries': record.stage2_queries,
            'total_queries': record.total_queries,
            'flags': ' '.join(record.flags),
            'error': '',
            'wall_seconds': wall_seconds,
            'started_at': started_at,
        }
        row.update(self.success(instance, model, record.final_hypothesis, record.params.epsilon))
        return row

    def baseline_to_row(
        self,
        result: BaselineResult,
        instance: Instance,
        model: LabelModel,
        variant: str,
        seed: int,
        epsilon: float,
        eta: float,
        wall_seconds: float = 0.0,
        started_at: str = '',
    ) -> Dict[str, Any]:
        row = {
            'variant': variant,
            'learner': result.kind,
            'seed': seed,
            'epsilon': epsilon,
            'eta': eta,
            'final_hypothesis': result.hypothesis,
            'stage1_queries': result.queries,
            'stage2_queries': 0,
            'total_queries': result.queries,
            'flags': ' '.join(result.flags),
            'error': '',
            'wall_seconds': wall_seconds,
            'started_at': started_at,
        }
        row.update(self.success(instance, model, result.hypothesis, epsilon))
        return row

    def error_row(self, variant: str, learner: str, seed: int, message: str, params: Optional[Dict] = None) -> Dict[str, Any]:
        """Row for a run that raised; counted as a failure."""
        params = params or {}
        row = {column: None for column in RESULT_COLUMNS}
        row.update({
            'variant': variant,
            'learner': learner,
            'seed': seed,
            'epsilon': params.get('epsilon'),
            'eta': params.get('eta'),
            'success': False,
            'flags': '',
            'error': message,
        })
        return row

    def validate_result_row(self, row: Dict[str, Any]) -> bool:
        """
        Raises:
            ReportValidationError: Missing columns or inconsistent query counts
        """
        missing = [column for column in RESULT_COLUMNS if column not in row]
        if missing:
            raise ReportValidationError(f"Result row is missing columns: {', '.join(missing)}")

        if row['error']:
            return True

        if row['stage1_queries'] < 0 or row['stage2_queries'] < 0:
            raise ReportValidationError(f"Negative query count in row {row['variant']}/{row['seed']}")
        if row['total_queries'] != row['stage1_queries'] + row['stage2_queries']:
            raise ReportValidationError(
                f"total_queries {row['total_queries']} != stage sums in row {row['variant']}/{row['seed']}"
            )
        return True

    def to_frame(self, rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
        for row in rows:
            self.validate_result_row(row)
        return pd.DataFrame(list(rows), columns=RESULT_COLUMNS)

    def aggregate(self, results: pd.DataFrame) -> pd.DataFrame:
        """
        One row per (variant, learner, epsilon): runs, errored runs, success
        rate, mean and median total queries over the successful executions.
        """
        if results.empty:
            return pd.DataFrame(columns=AGGREGATE_COLUMNS)

        frame = results.copy()
        frame['errored'] = frame['error'].fillna('').astype(str).str.len() > 0
        frame['success'] = frame['success'].astype(bool)

        rows = []
        for (variant, learner, epsilon), group in frame.groupby(['variant', 'learner', 'epsilon'], sort=False, dropna=False):
            executed = group[~group['errored']]
            rows.append({
                'variant': variant,
                'learner': learner,
                'epsilon': epsilon,
                'runs': len(group),
                'errors': int(group['errored'].sum()),
                'success_rate': float(group['success'].mean()),
                'mean_queries': float(executed['total_queries'].mean()) if len(executed) else np.nan,
                'median_queries': float(executed['total_queries'].median()) if len(executed) else np.nan,
            })

        return pd.DataFrame(rows, columns=AGGREGATE_COLUMNS)

    def growth_ratios(self, aggregate: pd.DataFrame) -> pd.DataFrame:
        """
        Per learner: median queries at each epsilon divided by the median at
        the next larger epsilon.
        """
        rows = []
        for learner, group in aggregate.groupby('learner', sort=False):
            ordered = group.dropna(subset=['epsilon']).sort_values('epsilon', ascending=False)
            medians = ordered.groupby('epsilon', sort=False)['median_queries'].median()
            epsilons = list(medians.index)
            for larger, smaller in zip(epsilons, epsilons[1:]):
                base = medians[larger]
                rows.append({
                    'learner': learner,
                    'from_epsilon': larger,
                    'to_epsilon': smaller,
                    'ratio': float(medians[smaller] / base) if base else np.nan,
                })
        return pd.DataFrame(rows, columns=['learner', 'from_epsilon', 'to_epsilon', 'ratio'])

    def time_span(self, results: pd.DataFrame) -> Optional[float]:
        """Seconds between the first and last run start, if recorded."""
        stamps = [parse_iso(s) for s in results.get('started_at', pd.Series(dtype=str)).dropna() if s]
        if len(stamps) < 2:
            return None
        return (max(stamps) - min(stamps)).total_seconds()


# Singleton instance
report_service = ReportService()
