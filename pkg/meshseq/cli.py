"""
meshseq - Main Entry Point

This is the main entry point for the meshseq application.
It defines the Typer application and registers all commands.

STRUCTURE:
---------
- The root callback configures logging (--verbose)
- Command implementations live in commands/ (data.py, model.py, experiment.py)

COMMANDS:
--------
- synth:      write a synthetic animated mesh dataset
- encode:     meshes → features
- decode:     features → meshes
- train:      train the generator
- generate:   continue a motion from initial frames
- complete:   fill frames between keyframes
- eval:       position error and feature-change curve
- experiment: desk-scale trend checks on synthetic data

TO ADD A NEW COMMAND:
--------------------
1. Write the function in commands/, decorated with @handle_errors
2. Export it from commands/__init__.py
3. Register it below with app.command("name")(function)

PROGRAMMATIC USE:
----------------
    from meshseq.cli import main
    exit_code = main(["encode", "--manifest", "m.json", "--out", "feats"])
"""

import logging
from typing import Optional

import click
import typer
from rich.logging import RichHandler

from .commands import complete, decode, encode, evaluate, experiment, generate, synth, train

app = typer.Typer(
    name="meshseq",
    help="meshseq: encode, generate and complete mesh animations.",
    add_completion=True,
    rich_markup_mode="rich",
    no_args_is_help=True,
)


@app.callback()
def configure(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Show debug logging"),
):
    """
    Mesh animation toolkit: deformation features, recurrent generation and keyframe completion.
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=verbose)],
        force=True,
    )


app.command("synth")(synth)
app.command("encode")(encode)
app.command("decode")(decode)
app.command("train")(train)
app.command("generate")(generate)
app.command("complete")(complete)
app.command("eval")(evaluate)
app.command("experiment")(experiment)


def main(argv: Optional[list[str]] = None) -> int:
    """Run the CLI on argv and return its exit code instead of exiting."""
    try:
        result = app(args=argv, prog_name="meshseq", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    app()
