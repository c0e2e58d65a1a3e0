"""
Conditional generation: continue a motion from a few initial frames.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from ..autodiff.engine import no_grad
from ..errors import DatasetError
from ..geometry.codec import FeatureFrame
from ..geometry.context import CodecContext
from ..geometry.mesh import Mesh, Topology
from ..network.generator import rollout
from ..network.model import GeneratorModel

logger = logging.getLogger(__name__)


def generate_features(
    model: GeneratorModel,
    initial: Sequence[np.ndarray],
    n: int,
    topology: Topology,
    initial_state: float = 0.1,
    seed: Optional[int] = None,
) -> list[np.ndarray]:
    """Roll the forward chain n steps past the normalized initial frames.

    With a seed, latents are sampled instead of taken at their mean.
    """
    if n == 0:
        return []
    rng = np.random.default_rng(seed) if seed is not None else None
    with no_grad():
        frames = rollout(
            list(initial), n, model.initial_state(initial_state), model, topology,
            sample=seed is not None, rng=rng,
        )
    return [frame.data for frame in frames]


def generate_conditional(
    model: GeneratorModel,
    initial: Sequence[Mesh],
    n: int,
    context: CodecContext,
    initial_state: float = 0.1,
    seed: Optional[int] = None,
) -> list[Mesh]:
    """
    Generate n meshes following `initial`.

    Every generated frame keeps vertex 0 at its position in the last
    initial frame.

    Raises:
        DatasetError: no initial frames
        TopologyError: an initial mesh does not match the reference connectivity
    """
    if not initial:
        raise DatasetError("conditional generation needs at least one initial frame")
    if n == 0:
        return []

    encoded = context.encode_sequence(initial, normalize=True)
    features = generate_features(
        model, [frame.features for frame in encoded], n, context.topology, initial_state, seed
    )
    anchor = initial[-1].vertices[0]
    meshes = [context.decode_mesh(FeatureFrame(f, normalized=True), anchor) for f in features]
    logger.info("Generated %d frames from %d initial frames", len(meshes), len(initial))
    return meshes
