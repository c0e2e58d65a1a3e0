"""
Codec context: the reference mesh, its topology and weights, plus the
optional normalization, bundled so sequences can be encoded and decoded
without re-deriving any of them.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import NormalizationError, TopologyError
from .codec import DeformationCodec, FeatureFrame, RotScaleField
from .mesh import CotanWeights, Mesh, Topology, build_topology, cotangent_weights
from .normalization import NormalizationParams, apply_normalization

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CodecContext:
    reference: Mesh
    topology: Topology
    weights: CotanWeights
    normalization: Optional[NormalizationParams] = None

    @classmethod
    def from_reference(
        cls, reference: Mesh, normalization: Optional[NormalizationParams] = None
    ) -> "CodecContext":
        topology = build_topology(reference)
        return cls(reference, topology, cotangent_weights(reference, topology), normalization)

    @property
    def vertex_count(self) -> int:
        return self.reference.vertex_count

    def with_normalization(self, params: NormalizationParams) -> "CodecContext":
        return replace(self, normalization=params)

    def check_mesh(self, mesh: Mesh) -> None:
        if not self.reference.same_connectivity(mesh):
            raise TopologyError(
                f"mesh with {mesh.vertex_count} vertices does not share the reference connectivity"
            )

    def encode_mesh(
        self, mesh: Mesh, previous: Optional[RotScaleField] = None
    ) -> tuple[FeatureFrame, RotScaleField]:
        self.check_mesh(mesh)
        return DeformationCodec.encode(self.reference, mesh, self.topology, self.weights, previous)

    def encode_sequence(self, meshes: Sequence[Mesh], normalize: bool = True) -> list[FeatureFrame]:
        """Encode frames in order, seeding each frame's rotation branch from the previous one."""
        frames = []
        previous = None
        for index, mesh in enumerate(meshes):
            frame, previous = self.encode_mesh(mesh, previous)
            frames.append(frame)
            logger.debug("Encoded frame %d", index)
        if normalize and self.normalization is not None:
            frames = [self.normalize(frame) for frame in frames]
        return frames

    def normalize(self, frame: FeatureFrame) -> FeatureFrame:
        if self.normalization is None:
            raise NormalizationError("context has no normalization parameters")
        return apply_normalization(frame, self.normalization, "forward")

    def denormalize(self, frame: FeatureFrame) -> FeatureFrame:
        if self.normalization is None:
            raise NormalizationError("context has no normalization parameters")
        return apply_normalization(frame, self.normalization, "inverse")

    def decode_mesh(self, frame: FeatureFrame, anchor_position: Optional[np.ndarray] = None) -> Mesh:
        if frame.normalized:
            frame = self.denormalize(frame)
        field = DeformationCodec.decode_feature(frame)
        return DeformationCodec.reconstruct_positions(
            field, self.reference, self.topology, self.weights, 0, anchor_position
        )

    def decode_sequence(
        self, frames: Sequence[FeatureFrame], anchors: Sequence[np.ndarray]
    ) -> list[Mesh]:
        return [self.decode_mesh(frame, anchor) for frame, anchor in zip(frames, anchors)]
