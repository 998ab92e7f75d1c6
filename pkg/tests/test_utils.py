"""Config, time and random-stream helpers."""

from datetime import datetime

import numpy as np
import pytest

from app.utils.config import Config
from app.utils.rng_utils import make_rng, run_stream, split
from app.utils.time_utils import Stopwatch, parse_iso, to_iso


class TestConfig:

    def test_defaults(self, monkeypatch):
        for name in ('CONSTANTS_MODE', 'PRACTICAL_C4', 'PRACTICAL_C5', 'SWEEP_WORKERS', 'DEFAULT_SEED'):
            monkeypatch.delenv(name, raising=False)
        settings = Config()
        assert settings.CONSTANTS_MODE == 'theory'
        assert not settings.is_practical()
        assert settings.algorithm_constants(False) == (300.0, 0.1)
        assert settings.algorithm_constants(True) == (3.0, 0.25)

    def test_practical_mode(self, monkeypatch):
        monkeypatch.setenv('CONSTANTS_MODE', 'Practical')
        monkeypatch.setenv('PRACTICAL_C4', '5')
        settings = Config()
        assert settings.is_practical()
        assert settings.algorithm_constants(True)[0] == 5.0

    @pytest.mark.parametrize('name, value', [
        ('LOG_LEVEL', 'LOUD'),
        ('CONSTANTS_MODE', 'heuristic'),
        ('ROUND_CONSTANT', 'eight'),
        ('DUEL_CONSTANT', '-1'),
        ('SWEEP_WORKERS', '0'),
        ('DEFAULT_SEED', '-3'),
    ])
    def test_invalid_values_fail_fast(self, monkeypatch, name, value):
        monkeypatch.setenv(name, value)
        with pytest.raises(ValueError, match=name):
            Config()


class TestTime:

    def test_iso_round_trip(self):
        stamp = to_iso(datetime(2026, 3, 1, 12, 30, 5))
        assert stamp == '2026-03-01T12:30:05Z'
        assert to_iso(parse_iso(stamp)) == stamp

    def test_offsets_are_normalized(self):
        assert to_iso(parse_iso('2026-03-01T14:30:05+02:00')) == '2026-03-01T12:30:05Z'

    def test_bad_timestamp(self):
        with pytest.raises(ValueError, match='ISO 8601'):
            parse_iso('yesterday')

    def test_stopwatch(self):
        with Stopwatch() as watch:
            sum(range(1000))
        assert watch.seconds >= 0.0


class TestStreams:

    def test_make_rng_is_seeded(self):
        assert make_rng(4).random() == make_rng(4).random()

    def test_run_stream_depends_on_both_keys(self):
        base = run_stream(1, 5).random(4)
        np.testing.assert_array_equal(base, run_stream(1, 5).random(4))
        assert not np.array_equal(base, run_stream(1, 6).random(4))
        assert not np.array_equal(base, run_stream(2, 5).random(4))

    def test_split_children_are_independent_and_reproducible(self):
        first = [child.random() for child in split(run_stream(0, 0), 3)]
        second = [child.random() for child in split(run_stream(0, 0), 3)]
        assert first == second
        assert len(set(first)) == 3
