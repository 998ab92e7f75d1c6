"""
Time Utilities for run logs

- UTC timestamps for run/sweep log headers (ISO 8601)
- Parsing those timestamps back in `report`
- Wall-clock stopwatch for result rows

Wall time is the only non-deterministic column a result row carries; it is
excluded from determinism comparisons.
"""

import time
from datetime import datetime
from typing import Optional

import pytz
from dateutil import parser


UTC_TZ = pytz.UTC


def utc_now() -> datetime:
    """Timezone-aware current time in UTC."""
    return datetime.now(UTC_TZ)


def to_iso(timestamp: datetime) -> str:
    """
    Format a datetime as ISO 8601 in UTC with a 'Z' suffix.

    Naive datetimes are assumed to already be UTC.
    """
    if timestamp.tzinfo is None:
        timestamp = UTC_TZ.localize(timestamp)

    return timestamp.astimezone(UTC_TZ).isoformat().replace("+00:00", "Z")


def parse_iso(value: str) -> datetime:
    """
    Parse an ISO 8601 timestamp written by `to_iso`.

    Raises:
        ValueError: If the string is not ISO 8601
    """
    try:
        parsed = parser.isoparse(value)
    except (ValueError, TypeError) as e:
        raise ValueError(f"Failed to parse timestamp '{value}'. Expected ISO 8601.") from e

    if parsed.tzinfo is None:
        parsed = UTC_TZ.localize(parsed)
    return parsed.astimezone(UTC_TZ)


class Stopwatch:
    """
    Context manager measuring wall time.

    Usage:
        with Stopwatch() as sw:
            ...
        print(sw.seconds)
    """

    def __init__(self):
        self._start: Optional[float] = None
        self.seconds: float = 0.0

    def __enter__(self) -> "Stopwatch":
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.seconds = time.perf_counter() - self._start
