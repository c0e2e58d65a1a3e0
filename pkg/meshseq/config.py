"""
meshseq Configuration Management

Training runs are configured by a JSON document whose keys are the
TrainConfig fields. Values resolve in three layers:

    TRAIN_CONFIG_SCHEMA defaults  <  --config file.json  <  CLI overrides

The resolved config is written next to training outputs (config.json) so a
run can be repeated exactly.
"""

import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .network.model import ModelConfig

logger = logging.getLogger(__name__)

# Training configuration (one entry per TrainConfig field)
TRAIN_CONFIG_SCHEMA = {
    "iterations": 7000,            # Adam iterations
    "batch_size": 8,               # sequences per iteration
    "sequence_length": 32,         # frames per training window (n), endpoints included
    "learning_rate": 1e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "test_fraction": 0.2,          # contiguous held-out share per sequence; 0 trains on everything
    "subsample_stride": None,      # None keeps each manifest's own stride
    "seed": 0,                     # drives init, splits, window sampling and latent noise
    "initial_state": 0.1,          # forward chain starts at +v, backward at -v
    "checkpoint_interval": 500,    # iterations between checkpoints (0 disables)
    "conv_channels": [9, 32, 64, 128],
    "latent_dim": 128,
    "lstm_layers": 3,
    "lstm_hidden": 128,
    "normalization": "vertex",     # "vertex" or "channel"
    "alpha1": 0.5,                 # bidirectional consistency weight
    "alpha2": 0.1,                 # KL + L2 weight
    "use_kl": True,
    "use_l2": True,
    "bidirectional": True,         # False trains the forward chain only
    "sample_latent": True,         # reparameterized sampling during training
}


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 7000
    batch_size: int = 8
    sequence_length: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    test_fraction: float = 0.2
    subsample_stride: Optional[int] = None
    seed: int = 0
    initial_state: float = 0.1
    checkpoint_interval: int = 500
    conv_channels: tuple = (9, 32, 64, 128)
    latent_dim: int = 128
    lstm_layers: int = 3
    lstm_hidden: int = 128
    normalization: str = "vertex"
    alpha1: float = 0.5
    alpha2: float = 0.1
    use_kl: bool = True
    use_l2: bool = True
    bidirectional: bool = True
    sample_latent: bool = True

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.sequence_length < 2:
            raise ConfigError("sequence_length must be at least 2")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in [0, 1)")
        if self.subsample_stride is not None and self.subsample_stride < 1:
            raise ConfigError("subsample_stride must be at least 1")
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ConfigError("learning_rate and epsilon must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.checkpoint_interval < 0:
            raise ConfigError("checkpoint_interval must be non-negative")
        if self.normalization not in ("vertex", "channel"):
            raise ConfigError(f"unknown normalization '{self.normalization}'")

    def model_config(self, vertex_count: int) -> ModelConfig:
        return ModelConfig(
            vertex_count=vertex_count,
            conv_channels=self.conv_channels,
            latent_dim=self.latent_dim,
            lstm_layers=self.lstm_layers,
            lstm_hidden=self.lstm_hidden,
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["conv_channels"] = list(self.conv_channels)
        return data


def load_train_config(path: Optional[Path] = None, **overrides) -> TrainConfig:
    """
    Resolve a TrainConfig from defaults, an optional JSON file and overrides.

    Overrides set to None are ignored so CLI options can be passed through
    unconditionally.

    Raises:
        ConfigError: unreadable file, unknown keys or invalid values
    """
    values = dict(TRAIN_CONFIG_SCHEMA)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path} must contain a JSON object")
        values.update(loaded)
        logger.debug("Loaded training config from %s", path)

    values.update({key: value for key, value in overrides.items() if value is not None})

    known = {f.name for f in fields(TrainConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return TrainConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
