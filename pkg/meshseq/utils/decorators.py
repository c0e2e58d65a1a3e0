"""
Command Decorators

Decorators shared by the CLI commands.

USAGE:
-----
    from ..utils.decorators import handle_errors

    @app.command()
    @handle_errors
    def my_command():
        # Library errors become a red one-line message and exit code 1
        pass

HOW IT WORKS:
------------
1. Runs the command
2. MeshSeqError (any meshseq failure) → message printed, exit 1
3. OSError (missing files, permissions) → message printed, exit 1
4. typer.Exit and usage errors pass through untouched
"""

import logging
from functools import wraps

import rich
import typer

from ..errors import MeshSeqError

logger = logging.getLogger(__name__)


def handle_errors(func):
    """
    Decorator that turns library failures into a one-line diagnostic.

    Example:
        @app.command()
        @handle_errors
        def encode(...):
            ...
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except MeshSeqError as exc:
            logger.debug("Command failed", exc_info=True)
            rich.print(f"[red]Error: {exc}[/red]")
            raise typer.Exit(1)
        except OSError as exc:
            logger.debug("Command failed", exc_info=True)
            rich.print(f"[red]Error: {exc}[/red]")
            raise typer.Exit(1)

    return wrapper
