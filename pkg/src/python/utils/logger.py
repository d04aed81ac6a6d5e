import functools
import logging
import os
import sys
import time
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Callable, Optional


_logger: Optional[logging.Logger] = None
_log_level: int = logging.INFO

LOG_FORMAT = "[%(asctime)s] %(levelname)-8s | %(name_short)-16s | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _resolve_log_dir() -> Optional[Path]:
    configured = os.environ.get("FNC_LOG_DIR")
    if configured is not None and configured.strip().lower() in ("", "none", "off"):
        return None
    if configured:
        return Path(configured)
    return Path(__file__).parent.parent.parent.parent / "logs"


def setup_logger(level: str = "INFO") -> logging.Logger:
    global _logger, _log_level

    _log_level = getattr(logging, level.upper(), logging.INFO)

    if _logger is not None:
        _logger.setLevel(_log_level)
        for handler in _logger.handlers:
            handler.setLevel(_log_level)
        return _logger

    _logger = logging.getLogger("fnc_toolkit")
    _logger.setLevel(_log_level)
    _logger.propagate = False

    if _logger.handlers:
        _logger.handlers.clear()

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    # stdout carries command output, so log lines go to stderr
    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setLevel(_log_level)
    stream_handler.setFormatter(formatter)
    _logger.addHandler(stream_handler)

    log_dir = _resolve_log_dir()
    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_dir / "fnc_toolkit.log",
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=5,
            encoding="utf-8"
        )
        file_handler.setLevel(_log_level)
        file_handler.setFormatter(formatter)
        _logger.addHandler(file_handler)

    return _logger


def get_logger(name: str) -> logging.LoggerAdapter:
    if _logger is None:
        setup_logger()

    return logging.LoggerAdapter(_logger, {"name_short": name})


def log_execution(
    func: Optional[Callable] = None,
    *,
    level: str = "DEBUG",
    start_msg: Optional[str] = None,
    end_msg: Optional[str] = None
) -> Any:
    """
    Decorator to log the start and end of a function execution.
    Can be used as:
    @log_execution
    @log_execution(level="INFO")
    @log_execution(start_msg="Fitting model...", end_msg="Model fitted")
    """
    def decorator(f: Callable) -> Callable:
        @functools.wraps(f)
        def wrapper(*args, **kwargs):
            logger = get_logger(f.__module__.rsplit(".", 1)[-1][:16])
            log_method = getattr(logger, level.lower(), logger.debug)
            func_name = f.__qualname__

            log_method(start_msg if start_msg is not None else f"Starting {func_name}...")
            start_time = time.perf_counter()

            try:
                result = f(*args, **kwargs)
            except Exception as e:
                logger.error(f"Error in {func_name}: {e}")
                raise

            elapsed = time.perf_counter() - start_time
            if end_msg is not None:
                log_method(f"{end_msg} (took {elapsed:.4f}s)")
            else:
                log_method(f"Finished {func_name} (took {elapsed:.4f}s)")
            return result
        return wrapper

    if func is None:
        return decorator
    return decorator(func)
