"""
Generator forward pass.

    (s', X') = G(s, X)        one recurrent step: X' = X + δX
    rollout(initial, n, s0)   warm up on initial[:-1], then feed outputs back

All functions operate on autodiff Tensors so the same code serves training
(inside a Tape) and inference (inside no_grad).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..autodiff import ops
from ..autodiff.engine import Tensor
from ..errors import DatasetError, NonFiniteError, ShapeMismatchError
from ..geometry.mesh import Topology
from .model import ChainState, GeneratorModel, MeshConvLayer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LatentRecord:
    mu: Tensor
    logvar: Tensor


def as_tensor(frame) -> Tensor:
    if isinstance(frame, Tensor):
        return frame
    features = getattr(frame, "features", frame)
    return Tensor(features)


def _check_finite_(tensor: Tensor, what: str) -> None:
    if not np.all(np.isfinite(tensor.data)):
        raise NonFiniteError(f"non-finite {what}")


def _activate_(x: Tensor, activation: str) -> Tensor:
    return ops.tanh(x) if activation == "tanh" else x


def mesh_conv_forward(x: Tensor, layer: MeshConvLayer, topology: Topology) -> Tensor:
    """y_i = act(W1 x_i + W2 · mean_{j∈N(i)} x_j + b), row-wise over vertices."""
    if x.data.ndim != 2 or x.shape[1] != layer.in_features:
        raise ShapeMismatchError(
            f"mesh conv expects {layer.in_features} input channels, got {x.shape}"
        )
    W1 = layer.W1 if layer.transposed else ops.transpose(layer.W1)
    W2 = layer.W2 if layer.transposed else ops.transpose(layer.W2)
    y = ops.add(ops.matmul(x, W1), ops.matmul(ops.neighbor_mean_gather(x, topology), W2))
    if layer.b is not None:
        y = ops.add_bias(y, layer.b)
    return _activate_(y, layer.activation)


def _linear_(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    return ops.add_bias(ops.matmul(x, ops.transpose(W)), b)


def reparameterize(mu: Tensor, logvar: Tensor, eps: np.ndarray) -> Tensor:
    """z = μ + exp(½ logvar) ⊙ ε."""
    return ops.add(mu, ops.mul(ops.exp(ops.scale(logvar, 0.5)), Tensor(eps)))


def encode_latent(
    x,
    model: GeneratorModel,
    topology: Topology,
    sample: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Tensor, Tensor, Tensor]:
    """
    Encode one frame to (z, μ, logvar). Without sampling z = μ.

    Raises:
        ShapeMismatchError: frame does not match the model vertex count
        NonFiniteError: activations or latent statistics are not finite
    """
    h = as_tensor(x)
    if h.shape != (model.config.vertex_count, 9):
        raise ShapeMismatchError(
            f"frame shape {h.shape} does not match ({model.config.vertex_count}, 9)"
        )
    for layer in model.encoder_layers:
        h = mesh_conv_forward(h, layer, topology)
    _check_finite_(h, "encoder activations")

    flat = ops.reshape(h, (1, model.config.flat_width))
    mu = _linear_(flat, model.latent_mu.W, model.latent_mu.b)
    logvar = _linear_(flat, model.latent_logvar.W, model.latent_logvar.b)
    _check_finite_(mu, "latent mean")
    _check_finite_(logvar, "latent log-variance")

    if not sample:
        return mu, mu, logvar
    rng = rng if rng is not None else np.random.default_rng()
    eps = rng.standard_normal(mu.shape)
    return reparameterize(mu, logvar, eps), mu, logvar


def lstm_step(z: Tensor, state: ChainState, model: GeneratorModel) -> tuple[Tensor, ChainState]:
    """Stacked LSTM update followed by the output projection to ẑ."""
    state.validate(model.config)
    H = model.config.lstm_hidden
    x = z
    hidden, cell = [], []
    for layer, h, c in zip(model.lstm_layers, state.hidden, state.cell):
        gates = ops.add_bias(
            ops.add(ops.matmul(x, ops.transpose(layer.Wx)), ops.matmul(h, ops.transpose(layer.Wh))),
            layer.b,
        )
        i = ops.sigmoid(ops.slice(gates, (slice(None), slice(0, H))))
        f = ops.sigmoid(ops.slice(gates, (slice(None), slice(H, 2 * H))))
        g = ops.tanh(ops.slice(gates, (slice(None), slice(2 * H, 3 * H))))
        o = ops.sigmoid(ops.slice(gates, (slice(None), slice(3 * H, 4 * H))))
        c_next = ops.add(ops.mul(f, c), ops.mul(i, g))
        h_next = ops.mul(o, ops.tanh(c_next))
        hidden.append(h_next)
        cell.append(c_next)
        x = h_next

    z_hat = _linear_(x, model.output_fc.W, model.output_fc.b)
    return z_hat, ChainState(hidden=hidden, cell=cell)


def decode_delta(z_hat: Tensor, model: GeneratorModel, topology: Topology) -> Tensor:
    """Latent ẑ → per-vertex feature delta through the transposed conv stack."""
    cfg = model.config
    h = ops.tanh(_linear_(z_hat, model.decoder_fc.W, model.decoder_fc.b))
    h = ops.reshape(h, (cfg.vertex_count, cfg.conv_channels[-1]))
    for layer in model.decoder_layers:
        h = mesh_conv_forward(h, layer, topology)
    return h


def generator_step(
    state: ChainState,
    x,
    model: GeneratorModel,
    topology: Topology,
    sample: bool = False,
    rng: Optional[np.random.Generator] = None,
    trace: Optional[list] = None,
) -> tuple[ChainState, Tensor]:
    """(s', X') = G(s, X). Appends (μ, logvar) to `trace` when given."""
    x = as_tensor(x)
    z, mu, logvar = encode_latent(x, model, topology, sample, rng)
    if trace is not None:
        trace.append(LatentRecord(mu, logvar))
    z_hat, next_state = lstm_step(z, state, model)
    return next_state, ops.add(x, decode_delta(z_hat, model, topology))


def rollout(
    initial: Sequence,
    n: int,
    state: ChainState,
    model: GeneratorModel,
    topology: Topology,
    sample: bool = False,
    rng: Optional[np.random.Generator] = None,
    trace: Optional[list] = None,
) -> list[Tensor]:
    """
    Warm up on initial[:-1] (outputs discarded), then generate n frames
    starting from initial[-1], each fed back as the next input.

    Raises:
        DatasetError: no initial frames or n < 1
    """
    if not initial:
        raise DatasetError("rollout needs at least one initial frame")
    if n < 1:
        raise DatasetError("rollout length must be at least 1")

    for frame in initial[:-1]:
        state, _ = generator_step(state, frame, model, topology, sample, rng, trace)

    x = as_tensor(initial[-1])
    frames = []
    for step in range(n):
        state, x = generator_step(state, x, model, topology, sample, rng, trace)
        frames.append(x)
        logger.debug("Generated step %d/%d", step + 1, n)
    return frames
