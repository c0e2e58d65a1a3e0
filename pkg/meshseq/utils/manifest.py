"""
Sequence manifests.

A manifest is a JSON file naming one reference mesh and an ordered list of
OBJ frames that share its connectivity:

    {
      "reference": "rest.obj",
      "frames": ["frame_0000.obj", "frame_0001.obj", ...],
      "subsample_stride": 1
    }

Relative paths resolve against the manifest's directory.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import DatasetError
from ..geometry.mesh import Mesh, load_obj

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SequenceManifest:
    reference: Path
    frames: tuple = field(default_factory=tuple)
    subsample_stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(Path(p) for p in self.frames))
        if self.subsample_stride < 1:
            raise DatasetError("subsample_stride must be at least 1")

    def effective_frames(self, stride: Optional[int] = None) -> tuple:
        return self.frames[:: stride or self.subsample_stride]

    def load_reference(self) -> Mesh:
        return load_obj(self.reference)

    def load_frames(self, stride: Optional[int] = None) -> list[Mesh]:
        return [load_obj(path) for path in self.effective_frames(stride)]


def load_manifest(path: Path) -> SequenceManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
        base = path.parent
        manifest = SequenceManifest(
            reference=base / data["reference"],
            frames=tuple(base / frame for frame in data["frames"]),
            subsample_stride=int(data.get("subsample_stride", 1)),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"invalid manifest {path}: {exc}") from exc
    logger.debug("Manifest %s: %d frames", path, len(manifest.frames))
    return manifest


def save_manifest(manifest: SequenceManifest, path: Path) -> None:
    """Write the manifest with paths relative to its own directory where possible."""
    path = Path(path)
    base = path.parent.resolve()

    def relative(p: Path) -> str:
        resolved = Path(p).resolve()
        try:
            return resolved.relative_to(base).as_posix()
        except ValueError:
            return str(resolved)

    data = {
        "reference": relative(manifest.reference),
        "frames": [relative(frame) for frame in manifest.frames],
        "subsample_stride": manifest.subsample_stride,
    }
    path.write_text(json.dumps(data, indent=2))
