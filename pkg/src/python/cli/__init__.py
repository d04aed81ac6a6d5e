import sys
from typing import List, Optional

from cli.ae_commands import AutoencoderCommands
from cli.bench_commands import BenchCommands
from cli.common import EXIT_DATA, EXIT_OK, EXIT_USAGE, global_options
from cli.ifs_commands import IfsCommands
from cli.ts_commands import SeriesCommands
from cli.vq_commands import VqCommands
from models.errors import DataError, UsageError
from utils.command_registry import CommandParser, add_commands
from utils.logger import get_logger, setup_logger

logger = get_logger("CLI")

COMMAND_GROUPS = (IfsCommands, AutoencoderCommands, VqCommands, SeriesCommands, BenchCommands)


def build_parser() -> CommandParser:
    parser = CommandParser(
        prog="fnc",
        description="Fractal, neural and vector-quantization image coding; Hertz time-series models",
        parents=[global_options(suppress_defaults=False)],
    )
    leaf_options = global_options(suppress_defaults=True)
    groups = parser.add_subparsers(dest="group", metavar="GROUP", required=True)
    for group_class in COMMAND_GROUPS:
        group = group_class()
        group_parser = groups.add_parser(group.name, help=group.help, description=group.help)
        commands = group_parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
        add_commands(commands, group, parents=[leaf_options])
    return parser


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns 0 on success, 1 on usage and other OS errors, 2 on data errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help and --version exit through argparse
        return int(e.code or 0)

    setup_logger(args.log_level)
    if args.threads < 1:
        sys.stderr.write("--threads must be >= 1\n")
        return EXIT_USAGE
    try:
        return args.handler(args)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_USAGE
    except (DataError, ValueError, FileNotFoundError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_DATA
    except OSError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    finally:
        logger.debug(f"{args.group} {args.command} done")


__all__ = ["build_parser", "cli_main", "EXIT_OK", "EXIT_USAGE", "EXIT_DATA"]
