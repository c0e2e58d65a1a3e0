"""
Feature files (MSQF) and the feature-directory sidecar.

MSQF LAYOUT (little-endian):
---------------------------
    magic     4 bytes  b"MSQF"
    version   u32      1
    vertices  u32
    channels  u32      9
    payload   float64 × vertices × channels, row-major

A feature directory holds frame_%04d.msqf plus features.json:

    {
      "reference": "/abs/path/rest.obj",
      "frames": ["frame_0000.msqf", ...],
      "anchors": [[x, y, z], ...],          # vertex 0 position per frame
      "normalized": true,
      "normalization": {"granularity": "vertex", "center": [...], "scale": [...]}
    }
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import FeatureFormatError, MeshSeqError
from ..geometry.codec import FEATURE_CHANNELS, FeatureFrame
from ..geometry.normalization import NormalizationParams
from .utils import _read_json_file_, _write_json_file_

logger = logging.getLogger(__name__)

MAGIC = b"MSQF"
VERSION = 1
HEADER = struct.Struct("<4sIII")
SIDECAR_NAME = "features.json"


def write_feature_file(path: Path, features: np.ndarray) -> None:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != FEATURE_CHANNELS:
        raise FeatureFormatError(f"features must be N×{FEATURE_CHANNELS}, got {features.shape}")
    header = HEADER.pack(MAGIC, VERSION, features.shape[0], FEATURE_CHANNELS)
    Path(path).write_bytes(header + np.ascontiguousarray(features, dtype="<f8").tobytes())


def read_feature_file(path: Path) -> np.ndarray:
    """
    Raises:
        FeatureFormatError: bad magic, unsupported version or wrong payload size
    """
    blob = Path(path).read_bytes()
    if len(blob) < HEADER.size:
        raise FeatureFormatError(f"{path}: file too short")
    magic, version, vertices, channels = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FeatureFormatError(f"{path}: not a feature file")
    if version != VERSION:
        raise FeatureFormatError(f"{path}: unsupported version {version}")
    if channels != FEATURE_CHANNELS:
        raise FeatureFormatError(f"{path}: expected {FEATURE_CHANNELS} channels, found {channels}")
    expected = HEADER.size + 8 * vertices * channels
    if len(blob) != expected:
        raise FeatureFormatError(f"{path}: payload size {len(blob)} != expected {expected}")
    payload = np.frombuffer(blob, dtype="<f8", offset=HEADER.size)
    return payload.reshape(vertices, channels).astype(np.float64)


@dataclass
class FeatureSidecar:
    reference: Path
    frames: list
    anchors: np.ndarray
    normalized: bool
    normalization: Optional[NormalizationParams] = None


def write_feature_dir(
    out_dir: Path,
    frames: Sequence[FeatureFrame],
    anchors: np.ndarray,
    reference: Path,
    normalization: Optional[NormalizationParams] = None,
) -> FeatureSidecar:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for index, frame in enumerate(frames):
        name = f"frame_{index:04d}.msqf"
        write_feature_file(out_dir / name, frame.features)
        names.append(name)

    normalized = bool(frames) and frames[0].normalized
    sidecar = FeatureSidecar(
        reference=Path(reference).resolve(),
        frames=names,
        anchors=np.asarray(anchors, dtype=np.float64).reshape(-1, 3),
        normalized=normalized,
        normalization=normalization,
    )
    _write_json_file_(
        out_dir / SIDECAR_NAME,
        {
            "reference": str(sidecar.reference),
            "frames": names,
            "anchors": sidecar.anchors.tolist(),
            "normalized": normalized,
            "normalization": normalization.to_dict() if normalization else None,
        },
    )
    logger.info("Wrote %d feature frames to %s", len(names), out_dir)
    return sidecar


def read_sidecar(path: Path) -> FeatureSidecar:
    """Read a features.json sidecar (or the one inside a feature directory)."""
    path = Path(path)
    if path.is_dir():
        path = path / SIDECAR_NAME
    data = _read_json_file_(path)
    try:
        normalization = (
            NormalizationParams.from_dict(data["normalization"]) if data.get("normalization") else None
        )
        return FeatureSidecar(
            reference=Path(data["reference"]),
            frames=list(data["frames"]),
            anchors=np.asarray(data["anchors"], dtype=np.float64).reshape(-1, 3),
            normalized=bool(data["normalized"]),
            normalization=normalization,
        )
    except (KeyError, TypeError, ValueError, MeshSeqError) as exc:
        raise FeatureFormatError(f"invalid sidecar {path}: {exc}") from exc


def read_feature_dir(directory: Path) -> tuple[list[FeatureFrame], FeatureSidecar]:
    directory = Path(directory)
    sidecar = read_sidecar(directory)
    frames = [
        FeatureFrame(read_feature_file(directory / name), normalized=sidecar.normalized)
        for name in sidecar.frames
    ]
    if len(sidecar.anchors) != len(frames):
        raise FeatureFormatError(f"{directory}: {len(frames)} frames but {len(sidecar.anchors)} anchors")
    return frames, sidecar
