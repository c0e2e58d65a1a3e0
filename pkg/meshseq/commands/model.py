"""
Model Commands

Commands that train the generator and use it.

COMMANDS:
--------
- train --manifest M [--manifest M2 ...] --out DIR:   train (or --resume) a generator
- generate --checkpoint C --reference R --initial A.obj ... --frames N --out DIR
- complete --reference R --keyframe A.obj --keyframe B.obj --frames N --out DIR

TRAIN OUTPUTS:
-------------
    DIR/model.msqc          final checkpoint (also carries the normalization)
    DIR/latest.msqc         periodic checkpoint for --resume
    DIR/normalization.json  {"normalization": {...}} fitted on the train split
    DIR/loss_log.csv        iteration,total,rec,bd,kl,l2
    DIR/config.json         resolved training configuration

NORMALIZATION LOOKUP (generate / complete):
------------------------------------------
    --normalization FILE (train output or encode sidecar), else the checkpoint's copy
"""

import logging
from pathlib import Path
from typing import List, Optional

import rich
import typer
from rich.progress import BarColumn, Progress, TextColumn, TimeRemainingColumn

from ..config import load_train_config
from ..errors import NormalizationError
from ..geometry.context import CodecContext
from ..geometry.mesh import load_obj, save_obj
from ..geometry.normalization import NormalizationParams
from ..network.checkpoint import CheckpointData, read_checkpoint, save_checkpoint
from ..prompts import confirm_output_dir
from ..sequence.completion import STRATEGIES, CMAConfig, complete_meshes
from ..sequence.generation import generate_conditional
from ..training.trainer import train_loop, write_loss_log
from ..utils.decorators import handle_errors
from ..utils.manifest import load_manifest
from ..utils.utils import _read_json_file_, _write_json_file_

logger = logging.getLogger(__name__)


def _ensure_writable_(out: Path, force: bool) -> None:
    if not confirm_output_dir(out, force):
        rich.print("[yellow]Nothing written.[/yellow]")
        raise typer.Exit(0)
    out.mkdir(parents=True, exist_ok=True)


def _resolve_normalization_(
    path: Optional[Path], checkpoint: Optional[CheckpointData]
) -> Optional[NormalizationParams]:
    if path is not None:
        data = _read_json_file_(path, NormalizationError)
        return NormalizationParams.from_dict(data.get("normalization") or data)
    if checkpoint is not None and checkpoint.metadata.get("normalization"):
        return NormalizationParams.from_dict(checkpoint.metadata["normalization"])
    return None


def _save_meshes_(meshes, out: Path) -> None:
    for index, mesh in enumerate(meshes):
        save_obj(mesh, out / f"frame_{index:04d}.obj")


@handle_errors
def train(
    manifest: List[Path] = typer.Option(..., "--manifest", "-m", help="Sequence manifest (repeatable)"),
    out: Path = typer.Option(..., "--out", "-o", help="Output directory"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Training config JSON"),
    iterations: Optional[int] = typer.Option(None, "--iterations", help="Override iterations"),
    batch_size: Optional[int] = typer.Option(None, "--batch", help="Override batch size"),
    sequence_length: Optional[int] = typer.Option(None, "--length", help="Override window length n"),
    learning_rate: Optional[float] = typer.Option(None, "--lr", help="Override learning rate"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override seed"),
    stride: Optional[int] = typer.Option(None, "--stride", help="Override subsample stride"),
    unidirectional: bool = typer.Option(False, "--unidirectional", help="Train the forward chain only"),
    resume: Optional[Path] = typer.Option(None, "--resume", help="Continue from a checkpoint"),
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite without asking"),
):
    """
    Train the generator on one or more mesh sequences.
    """
    cfg = load_train_config(
        config,
        iterations=iterations,
        batch_size=batch_size,
        sequence_length=sequence_length,
        learning_rate=learning_rate,
        seed=seed,
        subsample_stride=stride,
        bidirectional=False if unidirectional else None,
    )
    manifests = [load_manifest(path) for path in manifest]
    if resume is None:
        _ensure_writable_(out, force)
    out.mkdir(parents=True, exist_ok=True)
    _write_json_file_(out / "config.json", cfg.to_dict())

    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        TimeRemainingColumn(),
    ) as progress:
        task = progress.add_task("Training", total=cfg.iterations)

        def on_iteration(iteration, report):
            progress.update(task, completed=iteration + 1, description=f"loss {report.total:.5f}")

        result = train_loop(manifests, cfg, output_dir=out, resume=resume, on_iteration=on_iteration)

    normalization = result.data.context.normalization
    save_checkpoint(
        result.model,
        out / "model.msqc",
        {"iteration": cfg.iterations, "normalization": normalization.to_dict(), "train_config": cfg.to_dict()},
    )
    _write_json_file_(out / "normalization.json", {"normalization": normalization.to_dict()})
    write_loss_log(result.log, out / "loss_log.csv")

    if result.log:
        rich.print(f"Final loss: [bold]{result.log[-1][1].total:.6f}[/bold]")
    rich.print(f"[green]Model written to {out / 'model.msqc'}[/green]")


@handle_errors
def generate(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Trained model (.msqc)"),
    reference: Path = typer.Option(..., "--reference", "-r", help="Reference mesh (OBJ)"),
    initial: List[Path] = typer.Option(..., "--initial", "-i", help="Initial frame OBJ (repeatable, in order)"),
    frames: int = typer.Option(..., "--frames", "-n", min=0, help="Frames to generate"),
    out: Path = typer.Option(..., "--out", "-o", help="Output mesh directory"),
    normalization: Optional[Path] = typer.Option(None, "--normalization", help="Normalization JSON"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Sample latents with this seed"),
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite without asking"),
):
    """
    Continue a motion from one or more initial frames.
    """
    data = read_checkpoint(checkpoint)
    params = _resolve_normalization_(normalization, data)
    if params is None:
        raise NormalizationError("no normalization found; pass --normalization")
    context = CodecContext.from_reference(load_obj(reference), params)
    initial_state = data.metadata.get("train_config", {}).get("initial_state", 0.1)

    meshes = generate_conditional(
        data.model, [load_obj(path) for path in initial], frames, context, initial_state, seed
    )
    _ensure_writable_(out, force)
    _save_meshes_(meshes, out)
    rich.print(f"[green]Generated {len(meshes)} frames in {out}[/green]")


@handle_errors
def complete(
    reference: Path = typer.Option(..., "--reference", "-r", help="Reference mesh (OBJ)"),
    keyframe: List[Path] = typer.Option(..., "--keyframe", "-k", help="Keyframe OBJ (repeatable, in order)"),
    frames: List[int] = typer.Option(..., "--frames", "-n", help="Segment length incl. both keyframes (one per segment)"),
    out: Path = typer.Option(..., "--out", "-o", help="Output mesh directory"),
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Trained model (.msqc)"),
    strategy: str = typer.Option("bidirectional", "--strategy", "-s", help=f"One of: {', '.join(STRATEGIES)}"),
    normalization: Optional[Path] = typer.Option(None, "--normalization", help="Normalization JSON"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Diversity seed"),
    blend: int = typer.Option(0, "--blend", min=0, help="Cross-fade width around the stitch"),
    generations: int = typer.Option(200, "--generations", min=1, help="CMA-ES generations"),
    population: int = typer.Option(16, "--population", min=2, help="CMA-ES population"),
    sigma: float = typer.Option(0.05, "--sigma", help="CMA-ES initial step size"),
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite without asking"),
):
    """
    Fill in the frames between keyframes.
    """
    data = read_checkpoint(checkpoint) if checkpoint else None
    if data is None and strategy != "baseline-linear":
        rich.print(f"[red]Strategy '{strategy}' needs --checkpoint[/red]")
        raise typer.Exit(1)

    params = _resolve_normalization_(normalization, data)
    if params is None and strategy != "baseline-linear":
        raise NormalizationError("no normalization found; pass --normalization")
    context = CodecContext.from_reference(load_obj(reference), params)
    initial_state = data.metadata.get("train_config", {}).get("initial_state", 0.1) if data else 0.1
    settings = CMAConfig(population=population, sigma0=sigma, generations=generations, seed=seed or 0)

    meshes = complete_meshes(
        data.model if data else None,
        [load_obj(path) for path in keyframe],
        frames,
        context,
        strategy=strategy,
        diversity_seed=seed,
        blend_width=blend,
        settings=settings,
        initial_state=initial_state,
    )
    _ensure_writable_(out, force)
    _save_meshes_(meshes, out)
    rich.print(f"[green]Completed {len(meshes)} frames in {out}[/green]")
