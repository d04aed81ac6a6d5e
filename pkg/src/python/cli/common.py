import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict

from compressors import get_compressor
from compressors.compressor_base import CompressorBase
from config import Config
from models.binary_image import BinaryImage
from models.container import Container
from models.errors import UsageError
from services import container_service, image_io_service

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

FORMATS = ("text", "jsonl")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def global_options(suppress_defaults: bool) -> argparse.ArgumentParser:
    """
    Flags accepted both before the group name and after the command.

    The leaf copies use SUPPRESS defaults so they only override what was given.
    """
    def default(value):
        return argparse.SUPPRESS if suppress_defaults else value

    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--seed", type=int, default=default(Config.seed()), help="Seed for every random draw")
    parser.add_argument("--threads", type=int, default=default(Config.threads()), help="Worker threads")
    parser.add_argument("-o", "--output", default=default(None), help="Output file (or directory for bench)")
    parser.add_argument("--format", choices=FORMATS, default=default("text"), help="Summary output format")
    parser.add_argument(
        "--log-level", type=str.upper, choices=LOG_LEVELS, default=default(Config.log_level().upper()),
        help="Log level for stderr and the log file",
    )
    return parser


class CommandGroup:
    """A CLI group (`ifs`, `ae`, ...); commands are methods marked with @expose_command."""

    name: str = ""
    help: str = ""

    def require_output(self, args) -> Path:
        if not getattr(args, "output", None):
            raise UsageError(f"{self.name}: --output is required")
        return Path(args.output)

    def compressor(self, compressor_type: str, args) -> CompressorBase:
        compressor_class = get_compressor(compressor_type)
        if compressor_class is None:
            raise UsageError(f"Unknown compressor '{compressor_type}'")
        return compressor_class(threads=max(1, args.threads))

    def checked_params(self, compressor: CompressorBase, params: Dict[str, Any]) -> Dict[str, Any]:
        valid, message = compressor.validate_params(params)
        if not valid:
            raise UsageError(f"{self.name}: {message}")
        return params

    def load_image(self, path: str, args) -> BinaryImage:
        return image_io_service.load_image(path, getattr(args, "threshold", image_io_service.DEFAULT_THRESHOLD))

    def save_container(self, container: Container, path: Path) -> int:
        return container_service.save_container(container, path)

    def save_image(self, image: BinaryImage, args) -> int:
        return image_io_service.save_image(image, self.require_output(args), getattr(args, "pbm_mode", "P4"))

    def emit(self, args, record: Dict[str, Any]) -> None:
        """Write a command summary to stdout as aligned text or one JSON line."""
        sys.stdout.write(format_record(record, args.format))


def format_record(record: Dict[str, Any], fmt: str) -> str:
    if fmt == "jsonl":
        return json.dumps(record) + "\n"
    width = max((len(key) for key in record), default=0)
    return "".join(f"{key.ljust(width)}  {_format_value(value)}\n" for key, value in record.items())


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, dict):
        return json.dumps(value)
    return str(value)


def overrides(args, names: Dict[str, str]) -> Dict[str, Any]:
    """Map given (non-None) argparse attributes onto parameter names."""
    params: Dict[str, Any] = {}
    for attr, key in names.items():
        value = getattr(args, attr, None)
        if value is not None:
            params[key] = value
    return params
