"""
Configuration Management for the Active Learning Simulator

Loads environment variables and provides centralized config.
Run and sweep files carry per-experiment settings; this module only holds
the process-wide defaults those files fall back to.

Design:
- Singleton-like (one config instance for entire app)
- Fail-fast validation (errors on startup, not in the middle of a sweep)
- Theory vs practical constants selected by CONSTANTS_MODE
"""

import os
from typing import Tuple
from dotenv import load_dotenv


# Load environment variables from .env file
load_dotenv()


class Config:
    """
    Configuration class for environment-based settings.

    Usage:
        from app.utils.config import config

        print(config.LOG_LEVEL)
        c4, c5 = config.algorithm_constants(practical=True)
    """

    VALID_LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
    VALID_CONSTANTS_MODES = ['theory', 'practical']

    # Theory constants of the competitive bound (c4 >= 300, c5 = 1/10)
    THEORY_C4 = 300.0
    THEORY_C5 = 0.1

    def __init__(self):
        """Initialize configuration by reading environment variables."""
        self._load_app_settings()
        self._load_algorithm_settings()
        self._load_harness_settings()

    def _load_app_settings(self):
        """Load application-level settings."""
        self.LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()

        if self.LOG_LEVEL not in self.VALID_LOG_LEVELS:
            raise ValueError(
                f"Invalid LOG_LEVEL: '{self.LOG_LEVEL}'. "
                f"Must be one of: {', '.join(self.VALID_LOG_LEVELS)}"
            )

    def _load_algorithm_settings(self):
        """
        Load algorithm defaults.

        Raises:
            ValueError: If a numeric variable is malformed or out of range
        """
        self.CONSTANTS_MODE = os.getenv('CONSTANTS_MODE', 'theory').lower()

        if self.CONSTANTS_MODE not in self.VALID_CONSTANTS_MODES:
            raise ValueError(
                f"Invalid CONSTANTS_MODE value: '{self.CONSTANTS_MODE}'. "
                f"Must be 'theory' or 'practical'"
            )

        self.PRACTICAL_C4 = self._positive_float('PRACTICAL_C4', '3.0')
        self.PRACTICAL_C5 = self._positive_float('PRACTICAL_C5', '0.25')
        self.ROUND_CONSTANT = self._positive_float('ROUND_CONSTANT', '8.0')
        self.DUEL_CONSTANT = self._positive_float('DUEL_CONSTANT', '48.0')
        self.MAX_ROUNDS = self._positive_int('MAX_ROUNDS', '20000')

    def _load_harness_settings(self):
        """Load sweep/CLI defaults."""
        self.SWEEP_WORKERS = self._positive_int('SWEEP_WORKERS', '1')
        self.OUTPUT_DIR = os.getenv('OUTPUT_DIR', 'results')

        raw_seed = os.getenv('DEFAULT_SEED', '0')
        try:
            self.DEFAULT_SEED = int(raw_seed)
        except ValueError as e:
            raise ValueError(f"Invalid DEFAULT_SEED: '{raw_seed}'. Must be an integer") from e

        if self.DEFAULT_SEED < 0:
            raise ValueError(f"Invalid DEFAULT_SEED: {self.DEFAULT_SEED}. Must be >= 0")

    def _positive_float(self, name: str, default: str) -> float:
        raw = os.getenv(name, default)
        try:
            value = float(raw)
        except ValueError as e:
            raise ValueError(f"Invalid {name}: '{raw}'. Must be a number") from e

        if value <= 0:
            raise ValueError(f"Invalid {name}: {value}. Must be > 0")
        return value

    def _positive_int(self, name: str, default: str) -> int:
        raw = os.getenv(name, default)
        try:
            value = int(raw)
        except ValueError as e:
            raise ValueError(f"Invalid {name}: '{raw}'. Must be an integer") from e

        if value < 1:
            raise ValueError(f"Invalid {name}: {value}. Must be >= 1")
        return value

    def algorithm_constants(self, practical: bool) -> Tuple[float, float]:
        """
        Get the (c4, c5) pair for the requested constants mode.

        Args:
            practical: True for the desk-scale constants

        Returns:
            (c4, c5)
        """
        if practical:
            return self.PRACTICAL_C4, self.PRACTICAL_C5
        return self.THEORY_C4, self.THEORY_C5

    def is_practical(self) -> bool:
        """Check if practical constants are the process default."""
        return self.CONSTANTS_MODE == 'practical'

    def __repr__(self) -> str:
        return (
            f"<Config mode={self.CONSTANTS_MODE} log={self.LOG_LEVEL} "
            f"workers={self.SWEEP_WORKERS} out={self.OUTPUT_DIR}>"
        )


# Singleton instance
config = Config()


if __name__ == "__main__":
    """
    Validate configuration.

    Usage:
        python -m app.utils.config
        CONSTANTS_MODE=practical python -m app.utils.config
    """
    print("=" * 70)
    print("ACTIVE LEARNING SIMULATOR - CONFIGURATION TEST")
    print("=" * 70)

    print(f"\nLog Level: {config.LOG_LEVEL}")
    print(f"Constants mode: {config.CONSTANTS_MODE}")
    c4, c5 = config.algorithm_constants(config.is_practical())
    print(f"  c4={c4}  c5={c5}")
    print(f"  round constant c_k={config.ROUND_CONSTANT}")
    print(f"  duel constant c_d={config.DUEL_CONSTANT}")
    print(f"  max rounds={config.MAX_ROUNDS}")
    print(f"\nHarness: workers={config.SWEEP_WORKERS} out={config.OUTPUT_DIR} seed={config.DEFAULT_SEED}")

    print("\n" + "=" * 70)
    print("Configuration Valid! ✅")
    print("=" * 70)
