"""Recurrent mesh generator: model parameters, forward pass and checkpoints."""

from .generator import generator_step, rollout
from .model import ChainState, GeneratorModel, ModelConfig

__all__ = ["ChainState", "GeneratorModel", "ModelConfig", "generator_step", "rollout"]
