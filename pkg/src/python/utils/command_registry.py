import argparse
import inspect
from typing import Any, Callable, Iterable

from models.errors import UsageError
from utils.logger import get_logger

logger = get_logger("CmdRegistry")


def expose_command(name: str, description: str):
    """Decorator to mark a method as a CLI subcommand.

    Args:
        name: The name of the command within its group (e.g., 'encode')
        description: The help text shown by --help
    """
    def decorator(func: Callable):
        func._is_command = True
        func._command_name = name
        func._command_description = description
        func._command_arguments = getattr(func, "_command_arguments", [])
        return func
    return decorator


def argument(*flags: str, **kwargs: Any):
    """Attach one argparse argument to a command method; stack several, top to bottom."""
    def decorator(func: Callable):
        arguments = getattr(func, "_command_arguments", [])
        func._command_arguments = [(flags, kwargs)] + arguments
        return func
    return decorator


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def add_commands(subparsers, group_instance: Any, parents: Iterable[argparse.ArgumentParser] = ()) -> int:
    """Scan `group_instance` for @expose_command methods and register them as subparsers.

    Each parsed namespace carries the bound method as `handler`.
    """
    count = 0
    for name, member in inspect.getmembers(group_instance):
        if not inspect.ismethod(member):
            continue

        func = member.__func__
        if not getattr(func, "_is_command", False):
            continue

        command_name = getattr(func, "_command_name")
        logger.debug(f"Registering command '{command_name}' from {group_instance.__class__.__name__}.{name}")
        parser = subparsers.add_parser(
            command_name,
            help=getattr(func, "_command_description"),
            description=getattr(func, "_command_description"),
            parents=list(parents),
        )
        for flags, kwargs in getattr(func, "_command_arguments"):
            parser.add_argument(*flags, **kwargs)
        parser.set_defaults(handler=member)
        count += 1
    return count
