"""
Synthetic Datasets

Closed tubes (square "bars" and round cylinders) animated by analytic
periodic deformations, for tests and demos.

KINDS:
-----
- bend-bar:       square bar bent in the x–y plane, bend angle a·sin(2πt/p)
- twist-bar:      square bar twisted about its axis, tip angle a·sin(2πt/p)
- swing-cylinder: round cylinder bent in the x–z plane, a·sin(2πt/p)

The tube runs along +x from the origin; vertex 0 lies on the base ring,
which stays fixed under every deformation. Default size: 25 rings × 16
vertices plus two cap centers (402 vertices).
"""

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import DatasetError
from ..geometry.mesh import Mesh, save_obj
from ..utils.manifest import SequenceManifest, save_manifest

logger = logging.getLogger(__name__)

KINDS = ("bend-bar", "twist-bar", "swing-cylinder")
DEFAULT_AMPLITUDE = {
    "bend-bar": np.deg2rad(60.0),
    "twist-bar": np.deg2rad(90.0),
    "swing-cylinder": np.deg2rad(45.0),
}
LENGTH = 4.0
HALF_WIDTH = 0.5


def _square_ring_(segments: int) -> np.ndarray:
    """Points evenly spaced along the perimeter of a square, counter-clockwise."""
    corners = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1], [-1, -1]], dtype=np.float64) * HALF_WIDTH
    t = np.arange(segments) * 4.0 / segments
    side = np.floor(t).astype(int)
    frac = (t - side)[:, None]
    return corners[side] * (1.0 - frac) + corners[side + 1] * frac


def _round_ring_(segments: int) -> np.ndarray:
    angle = 2.0 * np.pi * np.arange(segments) / segments
    return HALF_WIDTH * np.column_stack([np.cos(angle), np.sin(angle)])


def tube_mesh(kind: str, rings: int = 25, segments: int = 16) -> Mesh:
    """Rest-pose tube for `kind`, consistently oriented, with fan caps."""
    if kind not in KINDS:
        raise DatasetError(f"unknown synthetic kind '{kind}'")
    if rings < 2 or segments < 3:
        raise DatasetError("a tube needs at least 2 rings of 3 vertices")

    profile = _round_ring_(segments) if kind == "swing-cylinder" else _square_ring_(segments)
    xs = np.linspace(0.0, LENGTH, rings)
    side = np.array([[x, y, z] for x in xs for y, z in profile])
    vertices = np.vstack([side, [[0.0, 0.0, 0.0], [LENGTH, 0.0, 0.0]]])
    start_cap, end_cap = rings * segments, rings * segments + 1

    def index(ring: int, s: int) -> int:
        return ring * segments + s % segments

    faces = []
    for ring in range(rings - 1):
        for s in range(segments):
            a, b = index(ring, s), index(ring + 1, s)
            c, d = index(ring + 1, s + 1), index(ring, s + 1)
            faces += [[a, b, c], [a, c, d]]
    for s in range(segments):
        faces.append([start_cap, index(0, s), index(0, s + 1)])
        faces.append([end_cap, index(rings - 1, s + 1), index(rings - 1, s)])
    return Mesh(vertices, np.asarray(faces))


def _bend_(points: np.ndarray, angle: float, axis: int) -> np.ndarray:
    """Bend along x with constant curvature angle/LENGTH towards coordinate `axis`."""
    if abs(angle) < 1e-12:
        return points.copy()
    radius = LENGTH / angle
    theta = points[:, 0] / radius
    offset = radius - points[:, axis]
    bent = points.copy()
    bent[:, 0] = offset * np.sin(theta)
    bent[:, axis] = radius - offset * np.cos(theta)
    return bent


def _twist_(points: np.ndarray, angle: float) -> np.ndarray:
    theta = angle * points[:, 0] / LENGTH
    cos, sin = np.cos(theta), np.sin(theta)
    twisted = points.copy()
    twisted[:, 1] = cos * points[:, 1] - sin * points[:, 2]
    twisted[:, 2] = sin * points[:, 1] + cos * points[:, 2]
    return twisted


def deform(kind: str, rest: Mesh, angle: float) -> Mesh:
    """Apply the kind's deformation at a given angle to the rest pose."""
    points = rest.vertices
    if kind == "bend-bar":
        moved = _bend_(points, angle, axis=1)
    elif kind == "twist-bar":
        moved = _twist_(points, angle)
    elif kind == "swing-cylinder":
        moved = _bend_(points, angle, axis=2)
    else:
        raise DatasetError(f"unknown synthetic kind '{kind}'")
    return rest.with_vertices(moved)


def synth_frames(
    kind: str,
    frames: int,
    period: float,
    amplitude: Optional[float] = None,
    rings: int = 25,
    segments: int = 16,
) -> tuple[Mesh, list[Mesh]]:
    """Rest mesh and `frames` deformed meshes; frame t uses angle a·sin(2πt/period)."""
    if frames < 1 or period <= 0:
        raise DatasetError("frames must be positive and period greater than zero")
    amplitude = DEFAULT_AMPLITUDE[kind] if amplitude is None else amplitude
    rest = tube_mesh(kind, rings, segments)
    sequence = [
        deform(kind, rest, amplitude * np.sin(2.0 * np.pi * t / period)) for t in range(frames)
    ]
    return rest, sequence


def synth_dataset(
    kind: str,
    out_dir: Path,
    frames: int = 200,
    period: float = 50.0,
    amplitude: Optional[float] = None,
    rings: int = 25,
    segments: int = 16,
) -> SequenceManifest:
    """Write rest.obj, frame_%04d.obj and manifest.json into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rest, sequence = synth_frames(kind, frames, period, amplitude, rings, segments)

    save_obj(rest, out_dir / "rest.obj")
    paths = []
    for t, mesh in enumerate(sequence):
        path = out_dir / f"frame_{t:04d}.obj"
        save_obj(mesh, path)
        paths.append(path)

    manifest = SequenceManifest(reference=out_dir / "rest.obj", frames=tuple(paths))
    save_manifest(manifest, out_dir / "manifest.json")
    logger.info("Wrote %d %s frames to %s", frames, kind, out_dir)
    return manifest
