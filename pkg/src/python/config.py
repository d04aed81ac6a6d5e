import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from utils.logger import get_logger, log_execution

logger = get_logger("Config")


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"Ignoring non-numeric {name}={raw!r}, using {default}")
        return default


class Config:
    """Process-wide defaults, read from the environment (optionally via a .env file)."""

    _loaded: bool = False

    DEFAULT_SEED = 0
    DEFAULT_MIN_COUNT = 16
    DEFAULT_SIGMA_FLOOR = 1e-8
    DEFAULT_BLOCK_SIDE = 20
    DEFAULT_THREADS = 1
    DEFAULT_LOG_LEVEL = "INFO"

    @classmethod
    @log_execution(start_msg="Loading Configuration", end_msg="Configuration Loaded")
    def load(cls, env_path: Optional[Path] = None) -> bool:
        if env_path is None:
            project_root = Path(__file__).parent.parent.parent
            env_path = project_root / ".env"

        if env_path.exists():
            load_dotenv(env_path)
            cls._loaded = True
            logger.info(f"Environment variables loaded from {env_path}")
        else:
            logger.debug(f".env file not found at {env_path}, using process environment")
        return cls._loaded

    @classmethod
    def is_configured(cls) -> bool:
        return cls._loaded

    @classmethod
    def seed(cls) -> int:
        return _env_int("FNC_SEED", cls.DEFAULT_SEED)

    @classmethod
    def min_count(cls) -> int:
        return _env_int("FNC_MIN_COUNT", cls.DEFAULT_MIN_COUNT)

    @classmethod
    def sigma_floor(cls) -> float:
        return _env_float("FNC_SIGMA_FLOOR", cls.DEFAULT_SIGMA_FLOOR)

    @classmethod
    def block_side(cls) -> int:
        return _env_int("FNC_BLOCK_SIDE", cls.DEFAULT_BLOCK_SIDE)

    @classmethod
    def threads(cls) -> int:
        return max(1, _env_int("FNC_THREADS", cls.DEFAULT_THREADS))

    @classmethod
    def log_level(cls) -> str:
        return os.environ.get("FNC_LOG_LEVEL", cls.DEFAULT_LOG_LEVEL)
