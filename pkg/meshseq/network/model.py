"""
Generator Model

Parameters and layer views of the recurrent mesh generator G.

ARCHITECTURE:
------------
    X (N×9) ──mesh conv ×L──▶ flatten ──FC──▶ μ, logvar (1×k) ──▶ z
    z ──LSTM (layers × H)──▶ FC ──▶ ẑ (1×k)
    ẑ ──FC, tanh──▶ unflatten (N×C_L) ──transposed mesh conv ×L──▶ δX (N×9)

The decoder's mesh convolutions reuse the encoder weights transposed and
carry no bias, so the decoder owns no convolution parameters of its own.

PARAMETER NAMES:
---------------
    encoder.conv{l}.W1 / .W2 / .b      l = 0..L-1
    latent.mu.W / .b, latent.logvar.W / .b
    lstm{l}.Wx / .Wh / .b              gate order i, f, g, o
    output.W / .b
    decoder.fc.W / .b
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..autodiff.engine import Tensor
from ..autodiff.params import ParamStore
from ..errors import ConfigError, ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    vertex_count: int
    conv_channels: tuple = (9, 32, 64, 128)
    latent_dim: int = 128
    lstm_layers: int = 3
    lstm_hidden: int = 128

    def __post_init__(self):
        channels = tuple(int(c) for c in self.conv_channels)
        object.__setattr__(self, "conv_channels", channels)
        if len(channels) < 2 or channels[0] != 9:
            raise ConfigError("conv_channels must start at 9 and list at least one layer")
        if min(self.vertex_count, self.latent_dim, self.lstm_layers, self.lstm_hidden, *channels) < 1:
            raise ConfigError("model dimensions must be positive")

    @property
    def flat_width(self) -> int:
        return self.vertex_count * self.conv_channels[-1]

    def to_dict(self) -> dict:
        data = asdict(self)
        data["conv_channels"] = list(self.conv_channels)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"invalid model config: {exc}") from exc


@dataclass(frozen=True)
class MeshConvLayer:
    """
    y_i = act(W1 x_i + W2 mean_{j∈N(i)} x_j + b).

    With transposed=True the stored encoder weights are applied as W1ᵀ, W2ᵀ.
    """

    W1: Tensor
    W2: Tensor
    b: Optional[Tensor] = None
    activation: str = "tanh"
    transposed: bool = False

    @property
    def in_features(self) -> int:
        return self.W1.shape[0] if self.transposed else self.W1.shape[1]

    @property
    def out_features(self) -> int:
        return self.W1.shape[1] if self.transposed else self.W1.shape[0]


@dataclass(frozen=True)
class LSTMLayer:
    Wx: Tensor
    Wh: Tensor
    b: Tensor

    @property
    def hidden(self) -> int:
        return self.Wh.shape[1]


@dataclass(frozen=True)
class Linear:
    W: Tensor
    b: Tensor


@dataclass
class ChainState:
    """Hidden and cell vectors (1×H each) for every LSTM layer."""

    hidden: list = field(default_factory=list)
    cell: list = field(default_factory=list)

    @classmethod
    def constant(cls, config: ModelConfig, value: float) -> "ChainState":
        shape = (1, config.lstm_hidden)
        return cls(
            hidden=[Tensor(np.full(shape, value)) for _ in range(config.lstm_layers)],
            cell=[Tensor(np.full(shape, value)) for _ in range(config.lstm_layers)],
        )

    @classmethod
    def from_vector(cls, config: ModelConfig, vector: np.ndarray) -> "ChainState":
        """Inverse of to_vector: layout [h_0, c_0, h_1, c_1, ...]."""
        H, layers = config.lstm_hidden, config.lstm_layers
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (2 * layers * H,):
            raise ShapeMismatchError(f"state vector must have {2 * layers * H} entries")
        blocks = vector.reshape(layers, 2, 1, H)
        return cls(
            hidden=[Tensor(blocks[l, 0]) for l in range(layers)],
            cell=[Tensor(blocks[l, 1]) for l in range(layers)],
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [np.concatenate([h.data.ravel(), c.data.ravel()]) for h, c in zip(self.hidden, self.cell)]
        )

    def negated(self) -> "ChainState":
        return ChainState(
            hidden=[Tensor(-h.data) for h in self.hidden],
            cell=[Tensor(-c.data) for c in self.cell],
        )

    def validate(self, config: ModelConfig) -> None:
        expected = (1, config.lstm_hidden)
        if len(self.hidden) != config.lstm_layers or len(self.cell) != config.lstm_layers:
            raise ShapeMismatchError(f"state must hold {config.lstm_layers} layers")
        for tensor in (*self.hidden, *self.cell):
            if tensor.shape != expected:
                raise ShapeMismatchError(f"state vectors must be {expected}, got {tensor.shape}")


def parameter_shapes(config: ModelConfig) -> dict[str, tuple]:
    channels = config.conv_channels
    k, H, flat = config.latent_dim, config.lstm_hidden, config.flat_width
    shapes = {}
    for l, (c_in, c_out) in enumerate(zip(channels[:-1], channels[1:])):
        shapes[f"encoder.conv{l}.W1"] = (c_out, c_in)
        shapes[f"encoder.conv{l}.W2"] = (c_out, c_in)
        shapes[f"encoder.conv{l}.b"] = (c_out,)
    shapes.update({
        "latent.mu.W": (k, flat), "latent.mu.b": (k,),
        "latent.logvar.W": (k, flat), "latent.logvar.b": (k,),
    })
    for l in range(config.lstm_layers):
        shapes[f"lstm{l}.Wx"] = (4 * H, k if l == 0 else H)
        shapes[f"lstm{l}.Wh"] = (4 * H, H)
        shapes[f"lstm{l}.b"] = (4 * H,)
    shapes.update({
        "output.W": (k, H), "output.b": (k,),
        "decoder.fc.W": (flat, k), "decoder.fc.b": (flat,),
    })
    return shapes


def _glorot_(rng: np.random.Generator, fan_out: int, fan_in: int, gain: float = 1.0) -> np.ndarray:
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


class GeneratorModel:
    """Owns the ParamStore and exposes typed layer views over it."""

    def __init__(self, config: ModelConfig, store: Optional[ParamStore] = None, seed: int = 0):
        self.config = config
        if store is None:
            store = ParamStore()
            self._initialize_(store, np.random.default_rng(seed))
        self.store = store
        self._check_store_()

    def _initialize_(self, store: ParamStore, rng: np.random.Generator) -> None:
        cfg = self.config
        channels = cfg.conv_channels
        for l, (c_in, c_out) in enumerate(zip(channels[:-1], channels[1:])):
            store.add(f"encoder.conv{l}.W1", _glorot_(rng, c_out, c_in))
            store.add(f"encoder.conv{l}.W2", _glorot_(rng, c_out, c_in))
            store.add(f"encoder.conv{l}.b", np.zeros(c_out), decay=False)

        k, flat = cfg.latent_dim, cfg.flat_width
        store.add("latent.mu.W", _glorot_(rng, k, flat))
        store.add("latent.mu.b", np.zeros(k), decay=False)
        store.add("latent.logvar.W", _glorot_(rng, k, flat, gain=0.1))
        store.add("latent.logvar.b", np.zeros(k), decay=False)

        H = cfg.lstm_hidden
        for l in range(cfg.lstm_layers):
            width = k if l == 0 else H
            store.add(f"lstm{l}.Wx", _glorot_(rng, 4 * H, width))
            store.add(f"lstm{l}.Wh", _glorot_(rng, 4 * H, H))
            bias = np.zeros(4 * H)
            bias[H : 2 * H] = 1.0  # forget gate
            store.add(f"lstm{l}.b", bias, decay=False)

        store.add("output.W", _glorot_(rng, k, H))
        store.add("output.b", np.zeros(k), decay=False)
        store.add("decoder.fc.W", _glorot_(rng, flat, k, gain=0.1))
        store.add("decoder.fc.b", np.zeros(flat), decay=False)
        logger.debug("Initialized generator with %d parameters", store.num_parameters())

    def _check_store_(self) -> None:
        for name, shape in parameter_shapes(self.config).items():
            if name not in self.store:
                raise ShapeMismatchError(f"parameter '{name}' missing from store")
            if self.store[name].shape != shape:
                raise ShapeMismatchError(
                    f"parameter '{name}' has shape {self.store[name].shape}, expected {shape}"
                )

    @property
    def encoder_layers(self) -> list[MeshConvLayer]:
        s = self.store
        return [
            MeshConvLayer(s[f"encoder.conv{l}.W1"], s[f"encoder.conv{l}.W2"], s[f"encoder.conv{l}.b"])
            for l in range(len(self.config.conv_channels) - 1)
        ]

    @property
    def decoder_layers(self) -> list[MeshConvLayer]:
        encoder = self.encoder_layers
        layers = []
        for position, layer in enumerate(reversed(encoder)):
            last = position == len(encoder) - 1
            layers.append(
                MeshConvLayer(
                    layer.W1, layer.W2, None,
                    activation="identity" if last else "tanh",
                    transposed=True,
                )
            )
        return layers

    @property
    def latent_mu(self) -> Linear:
        return Linear(self.store["latent.mu.W"], self.store["latent.mu.b"])

    @property
    def latent_logvar(self) -> Linear:
        return Linear(self.store["latent.logvar.W"], self.store["latent.logvar.b"])

    @property
    def lstm_layers(self) -> list[LSTMLayer]:
        s = self.store
        return [LSTMLayer(s[f"lstm{l}.Wx"], s[f"lstm{l}.Wh"], s[f"lstm{l}.b"]) for l in range(self.config.lstm_layers)]

    @property
    def output_fc(self) -> Linear:
        return Linear(self.store["output.W"], self.store["output.b"])

    @property
    def decoder_fc(self) -> Linear:
        return Linear(self.store["decoder.fc.W"], self.store["decoder.fc.b"])

    def decoder_conv_parameter_count(self) -> int:
        return self.store.num_parameters(prefix="decoder.conv")

    def initial_state(self, value: float) -> ChainState:
        return ChainState.constant(self.config, value)
