"""
Feature normalization to [-0.95, 0.95].

Parameters are fitted per (vertex, channel) or per channel over a set of
unnormalized frames. Dimensions that never change map to 0 and invert to
their constant value.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import NormalizationError, ShapeMismatchError
from .codec import FEATURE_CHANNELS, FeatureFrame

logger = logging.getLogger(__name__)

TARGET = 0.95
GRANULARITIES = ("vertex", "channel")


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    center: np.ndarray
    scale: np.ndarray
    granularity: str = "vertex"

    def to_dict(self) -> dict:
        return {
            "granularity": self.granularity,
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationParams":
        try:
            granularity = data["granularity"]
            center = np.asarray(data["center"], dtype=np.float64)
            scale = np.asarray(data["scale"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise NormalizationError(f"invalid normalization parameters: {exc}") from exc
        if granularity not in GRANULARITIES or center.shape != scale.shape:
            raise NormalizationError("invalid normalization parameters")
        return cls(center=center, scale=scale, granularity=granularity)


def fit_normalization(
    frames: Sequence[FeatureFrame], granularity: str = "vertex"
) -> NormalizationParams:
    """
    Affine map sending each dimension's [min, max] onto [-0.95, 0.95].

    Raises:
        NormalizationError: no frames, normalized input or unknown granularity
        ShapeMismatchError: frames with different vertex counts
    """
    if granularity not in GRANULARITIES:
        raise NormalizationError(f"unknown granularity '{granularity}'")
    if not frames:
        raise NormalizationError("cannot fit normalization on zero frames")
    if any(frame.normalized for frame in frames):
        raise NormalizationError("normalization must be fitted on unnormalized frames")
    if len({frame.vertex_count for frame in frames}) != 1:
        raise ShapeMismatchError("frames have different vertex counts")

    stacked = np.stack([frame.features for frame in frames])
    axis = 0 if granularity == "vertex" else (0, 1)
    low = stacked.min(axis=axis)
    high = stacked.max(axis=axis)

    span = high - low
    magnitude = np.maximum(1.0, np.maximum(np.abs(low), np.abs(high)))
    constant = span <= 1e-12 * magnitude
    scale = np.where(constant, 0.0, 2.0 * TARGET / np.where(constant, 1.0, span))
    center = 0.5 * (high + low)

    logger.debug(
        "Fitted %s normalization on %d frames (%d constant dimensions)",
        granularity, len(frames), int(constant.sum()),
    )
    return NormalizationParams(center=center, scale=scale, granularity=granularity)


def apply_normalization(
    frame: FeatureFrame, params: NormalizationParams, direction: str = "forward"
) -> FeatureFrame:
    """
    Map a frame into (forward) or out of (inverse) normalized space.

    Raises:
        NormalizationError: frame already in the target space or bad direction
        ShapeMismatchError: per-vertex parameters fitted on another vertex count
    """
    if params.granularity == "vertex" and params.center.shape[0] != frame.vertex_count:
        raise ShapeMismatchError(
            f"parameters fitted for {params.center.shape[0]} vertices, "
            f"frame has {frame.vertex_count}"
        )
    if params.center.shape[-1] != FEATURE_CHANNELS:
        raise ShapeMismatchError("parameters do not have 9 channels")

    x = frame.features
    if direction == "forward":
        if frame.normalized:
            raise NormalizationError("frame is already normalized")
        return FeatureFrame((x - params.center) * params.scale, normalized=True)
    if direction == "inverse":
        if not frame.normalized:
            raise NormalizationError("frame is not normalized")
        varying = params.scale > 0
        safe = np.where(varying, params.scale, 1.0)
        restored = np.where(varying, x / safe + params.center, params.center)
        return FeatureFrame(np.broadcast_to(restored, x.shape).copy(), normalized=False)
    raise NormalizationError(f"unknown direction '{direction}'")
