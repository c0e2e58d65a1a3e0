"""
Experiment Command

Runs one of the desk-scale trend checks and reports whether it holds.

USAGE:
-----
    meshseq experiment overfit --iterations 2000 --out overfit.json
    meshseq experiment initial-frames --config train.json

Exit code 1 when a criterion fails; the report is written either way.
Synthetic data goes to a temporary directory unless --work-dir is given.
"""

import logging
import tempfile
from pathlib import Path
from typing import Optional

import rich
import typer
from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn
from rich.table import Table

from ..sequence.experiments import EXPERIMENTS, ExperimentReport, experiment_config, run_experiment
from ..utils.decorators import handle_errors
from ..utils.utils import _write_json_file_

logger = logging.getLogger(__name__)
console = Console()


def _show_report_(report: ExperimentReport) -> None:
    table = Table(title=f"Experiment: {report.name}", show_header=True, header_style="bold cyan")
    table.add_column("Measure", style="green", no_wrap=True)
    table.add_column("Value")
    for key, value in report.values.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        table.add_row(key, str(value))
    for criterion, held in report.criteria.items():
        table.add_row(criterion, "[green]holds[/green]" if held else "[red]fails[/red]")
    console.print(table)


@handle_errors
def experiment(
    name: str = typer.Argument(..., help=f"One of: {', '.join(EXPERIMENTS)}"),
    iterations: Optional[int] = typer.Option(None, "--iterations", help="Override iterations"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override seed"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Training config JSON"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the report as JSON"),
    work_dir: Optional[Path] = typer.Option(None, "--work-dir", help="Keep the synthetic data here"),
):
    """
    Train on synthetic data and check one trend.
    """
    cfg = experiment_config(config, iterations=iterations, seed=seed)

    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
    ) as progress:
        task = progress.add_task("Training", total=cfg.iterations)

        def on_iteration(iteration, report):
            progress.update(task, completed=iteration + 1, description=f"loss {report.total:.5f}")

        if work_dir is not None:
            report = run_experiment(name, cfg, work_dir, on_iteration)
        else:
            with tempfile.TemporaryDirectory(prefix="meshseq-") as tmp:
                report = run_experiment(name, cfg, Path(tmp), on_iteration)

    _show_report_(report)
    if out is not None:
        _write_json_file_(out, report.to_dict())
        rich.print(f"Report written to {out}")

    if not report.passed:
        rich.print(f"[red]Experiment '{name}' failed[/red]")
        raise typer.Exit(1)
    rich.print(f"[green]Experiment '{name}' holds[/green]")
