"""
Data Commands

Commands that move meshes in and out of feature space and score results.

COMMANDS:
--------
- synth KIND --out DIR:          write a synthetic animated tube dataset
- encode --manifest M --out DIR: meshes → normalized MSQF features + sidecar
- decode --features DIR --out DIR: features → OBJ meshes
- eval --pred DIR --gt DIR:      per-vertex position error (and feature-change curve)

DATA FLOW (encode / decode):
---------------------------
    manifest.json → OBJ frames → DeformationCodec → normalize → frame_%04d.msqf
                                                                features.json (anchors, params)
    features.json + frame_%04d.msqf → denormalize → reconstruct → frame_%04d.obj
"""

import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import rich
import typer

from ..geometry.context import CodecContext
from ..geometry.mesh import load_obj, save_obj
from ..geometry.normalization import NormalizationParams, fit_normalization
from ..prompts import confirm_output_dir
from ..sequence.evaluation import (
    REPORT_SCALE,
    eval_position_error,
    feature_change_curve,
    write_curve_csv,
    write_error_csv,
)
from ..sequence.synthetic import KINDS, synth_dataset
from ..utils.decorators import handle_errors
from ..utils.feature_io import read_feature_dir, read_sidecar, write_feature_dir
from ..utils.manifest import load_manifest
from ..utils.utils import _load_obj_dir_

logger = logging.getLogger(__name__)


def _ensure_writable_(out: Path, force: bool) -> None:
    if not confirm_output_dir(out, force):
        rich.print("[yellow]Nothing written.[/yellow]")
        raise typer.Exit(0)
    out.mkdir(parents=True, exist_ok=True)


@handle_errors
def synth(
    kind: str = typer.Argument(..., help=f"One of: {', '.join(KINDS)}"),
    out: Path = typer.Option(..., "--out", "-o", help="Output directory"),
    frames: int = typer.Option(200, "--frames", "-n", min=1, help="Number of frames"),
    period: float = typer.Option(50.0, "--period", help="Motion period in frames"),
    amplitude: Optional[float] = typer.Option(None, "--amplitude", help="Peak angle in degrees"),
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite without asking"),
):
    """
    Write a synthetic animated mesh sequence with its manifest.
    """
    _ensure_writable_(out, force)
    radians = None if amplitude is None else float(np.deg2rad(amplitude))
    synth_dataset(kind, out, frames=frames, period=period, amplitude=radians)
    rich.print(f"[green]Wrote {frames} {kind} frames to {out / 'manifest.json'}[/green]")


@handle_errors
def encode(
    manifest: Path = typer.Option(..., "--manifest", "-m", help="Sequence manifest (JSON)"),
    out: Path = typer.Option(..., "--out", "-o", help="Output feature directory"),
    granularity: str = typer.Option("vertex", "--granularity", help="Normalization: vertex or channel"),
    raw: bool = typer.Option(False, "--raw", help="Store unnormalized features"),
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite without asking"),
):
    """
    Encode a manifest's meshes as 9-D per-vertex features.
    """
    sequence = load_manifest(manifest)
    meshes = sequence.load_frames()
    context = CodecContext.from_reference(sequence.load_reference())
    frames = context.encode_sequence(meshes, normalize=False)

    params: Optional[NormalizationParams] = None
    if not raw:
        params = fit_normalization(frames, granularity)
        context = context.with_normalization(params)
        frames = [context.normalize(frame) for frame in frames]

    _ensure_writable_(out, force)
    anchors = np.stack([mesh.vertices[0] for mesh in meshes])
    write_feature_dir(out, frames, anchors, sequence.reference, params)
    rich.print(f"[green]Encoded {len(frames)} frames to {out}[/green]")


@handle_errors
def decode(
    features: Path = typer.Option(..., "--features", help="Feature directory written by encode"),
    out: Path = typer.Option(..., "--out", "-o", help="Output mesh directory"),
    reference: Optional[Path] = typer.Option(None, "--reference", help="Override the sidecar's reference mesh"),
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite without asking"),
):
    """
    Reconstruct OBJ meshes from a feature directory.
    """
    frames, sidecar = read_feature_dir(features)
    context = CodecContext.from_reference(load_obj(reference or sidecar.reference), sidecar.normalization)

    _ensure_writable_(out, force)
    for index, (frame, anchor) in enumerate(zip(frames, sidecar.anchors)):
        save_obj(context.decode_mesh(frame, anchor), out / f"frame_{index:04d}.obj")
    rich.print(f"[green]Decoded {len(frames)} frames to {out}[/green]")


@handle_errors
def evaluate(
    pred: Path = typer.Option(..., "--pred", help="Directory of predicted OBJ frames"),
    gt: Path = typer.Option(..., "--gt", help="Directory of ground-truth OBJ frames"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Per-frame error CSV"),
    horizon: Optional[List[int]] = typer.Option(None, "--horizon", help="Report the error at this frame (repeatable)"),
    curve_out: Optional[Path] = typer.Option(None, "--curve-out", help="Feature-change curve CSV"),
    reference: Optional[Path] = typer.Option(None, "--reference", help="Reference mesh for --curve-out"),
    normalization: Optional[Path] = typer.Option(None, "--normalization", help="Sidecar with normalization for --curve-out"),
):
    """
    Score predicted frames against ground truth (mean per-vertex distance, ×1e-4).
    """
    predicted = _load_obj_dir_(pred)
    truth = _load_obj_dir_(gt)
    report = eval_position_error(predicted, truth)

    rich.print(f"Frames: {len(predicted)}")
    rich.print(f"Mean error: [bold]{report.mean_error * REPORT_SCALE:.4f}[/bold] ×1e-4")
    for h in horizon or []:
        rich.print(f"  frame {h}: {report.at_horizon(h) * REPORT_SCALE:.4f} ×1e-4")
    if out is not None:
        write_error_csv(report, out)
        rich.print(f"[green]Wrote {out}[/green]")

    if curve_out is not None:
        if reference is None:
            rich.print("[red]--curve-out needs --reference[/red]")
            raise typer.Exit(1)
        params = read_sidecar(normalization).normalization if normalization else None
        context = CodecContext.from_reference(load_obj(reference), params)
        frames = context.encode_sequence(predicted, normalize=params is not None)
        write_curve_csv(feature_change_curve([f.features for f in frames]), curve_out)
        rich.print(f"[green]Wrote {curve_out}[/green]")
