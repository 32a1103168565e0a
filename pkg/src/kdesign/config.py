"""
Runtime settings for kdesign, read from the environment or a .env file.
"""

import logging
import os

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

load_dotenv()

DEFAULT_MASTER_SEED = 0x5EED_CAFE_F00D_D1CE

_LOG_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")


def _env_int(name: str, default: int) -> int | None:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw, 0)
    except ValueError:
        logger.warning(f"Ignoring unparsable {name}={raw!r}")
        return None


class Settings:
    """Settings holder; explicit arguments win over environment variables."""

    def __init__(
        self,
        master_seed: int | None = None,
        bootstrap_resamples: int | None = None,
        workers: int | None = None,
        log_level: str | None = None,
        output_dir: str | None = None,
    ):
        self.master_seed = (
            master_seed
            if master_seed is not None
            else _env_int("KDESIGN_MASTER_SEED", DEFAULT_MASTER_SEED)
        )
        self.bootstrap_resamples = (
            bootstrap_resamples
            if bootstrap_resamples is not None
            else _env_int("KDESIGN_BOOTSTRAP_RESAMPLES", 2000)
        )
        self.workers = workers if workers is not None else _env_int("KDESIGN_WORKERS", 1)
        self.log_level = (log_level or os.getenv("KDESIGN_LOG_LEVEL") or "WARNING").upper()
        self.output_dir = output_dir or os.getenv("KDESIGN_OUTPUT_DIR") or "."

    def validate(self) -> bool:
        """Check that every numeric field parsed and lies in range."""
        return (
            self.master_seed is not None
            and 0 <= self.master_seed < 2**64
            and self.bootstrap_resamples is not None
            and self.bootstrap_resamples >= 1
            and self.workers is not None
            and self.workers >= 1
            and self.log_level in _LOG_LEVELS
        )


# Default settings (uses environment variables)
_default_settings = Settings()


def get_settings(settings: Settings | None = None) -> Settings:
    """Return the given settings or the module default."""
    return settings or _default_settings
