"""
Evaluation: per-vertex position error and the feature-change curve.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import ShapeMismatchError
from ..geometry.mesh import Mesh

logger = logging.getLogger(__name__)

# Errors are reported in units of 1e-4
REPORT_SCALE = 1e4


@dataclass
class EvalReport:
    per_frame_error: np.ndarray
    feature_change: Optional[np.ndarray] = None

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.per_frame_error)) if len(self.per_frame_error) else 0.0

    @property
    def scaled_per_frame(self) -> np.ndarray:
        return self.per_frame_error * REPORT_SCALE

    def at_horizon(self, horizon: int) -> float:
        """Error at the horizon-th frame (1-based)."""
        if not 1 <= horizon <= len(self.per_frame_error):
            raise ShapeMismatchError(
                f"horizon {horizon} outside 1..{len(self.per_frame_error)}"
            )
        return float(self.per_frame_error[horizon - 1])


def eval_position_error(predicted: Sequence[Mesh], truth: Sequence[Mesh]) -> EvalReport:
    """
    Per frame: mean over vertices of the Euclidean distance between
    predicted and ground-truth positions.

    Raises:
        ShapeMismatchError: frame or vertex counts differ
    """
    if len(predicted) != len(truth):
        raise ShapeMismatchError(f"{len(predicted)} predicted frames vs {len(truth)} ground truth")
    if not predicted:
        return EvalReport(per_frame_error=np.zeros(0))
    if any(p.vertex_count != g.vertex_count for p, g in zip(predicted, truth)):
        raise ShapeMismatchError("predicted and ground-truth meshes differ in vertex count")
    errors = np.array(
        [np.linalg.norm(p.vertices - g.vertices, axis=1).mean() for p, g in zip(predicted, truth)]
    )
    return EvalReport(per_frame_error=errors)


def feature_change_curve(frames: Sequence[np.ndarray]) -> np.ndarray:
    """
    mean|X_{t+1} − X_t| / mean|X_t| for consecutive frames; a frame of
    zeros gives an infinite ratio.
    """
    frames = [np.asarray(f, dtype=np.float64) for f in frames]
    series = np.empty(max(len(frames) - 1, 0))
    for t in range(len(series)):
        change = np.mean(np.abs(frames[t + 1] - frames[t]))
        size = np.mean(np.abs(frames[t]))
        series[t] = change / size if size > 0 else np.inf
    return series


def write_error_csv(report: EvalReport, path: Path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["frame", "error", "error_1e-4"])
        for index, error in enumerate(report.per_frame_error, start=1):
            writer.writerow([index, float(error), float(error * REPORT_SCALE)])


def write_curve_csv(series: np.ndarray, path: Path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["frame", "feature_change"])
        for index, value in enumerate(series, start=1):
            writer.writerow([index, float(value)])
