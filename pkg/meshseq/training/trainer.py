"""
Trainer

Bidirectional training of the generator on fixed-length windows.

TRAINING STEP:
-------------
    sample B windows (X_1 .. X_n) from the train segments
         ↓
    forward chain  S_f = [X_1, G(X_1), ...]   from state +v
    backward chain S_b = [X_n, G(X_n), ...]   from state −v
         ↓
    compute_loss (reconstruction, bidirectional consistency, KL, L2)
         ↓
    batch mean → tape.backward → adam_step

RESUMING:
--------
Checkpoints store the Adam moments, the iteration index and the sampling
RNG state, so a resumed run reproduces the losses of an uninterrupted one.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ..autodiff.engine import Tape, Tensor
from ..config import TrainConfig
from ..errors import DatasetError, NonFiniteError, TrainingDivergedError
from ..geometry.mesh import Topology
from ..network.checkpoint import read_checkpoint, save_checkpoint
from ..network.generator import LatentRecord, as_tensor, rollout
from ..network.model import ChainState, GeneratorModel
from ..utils.manifest import SequenceManifest
from .dataset import TrainingData, Window, prepare_dataset, sample_window
from .losses import LOG_COLUMNS, LossReport, LossWeights, compute_loss
from .optimizer import adam_step

logger = logging.getLogger(__name__)

LATEST_CHECKPOINT = "latest.msqc"
LAST_GOOD_CHECKPOINT = "last_good.msqc"


@dataclass
class TrainResult:
    model: GeneratorModel
    log: list = field(default_factory=list)
    data: Optional[TrainingData] = None


def _chain_(
    start,
    n: int,
    state: ChainState,
    model: GeneratorModel,
    topology: Topology,
    sample: bool,
    rng: Optional[np.random.Generator],
    trace: Optional[list],
) -> list[Tensor]:
    frames = [as_tensor(start)]
    if n > 1:
        frames += rollout([start], n - 1, state, model, topology, sample, rng, trace)
    return frames


def bidirectional_rollout(
    start,
    end,
    n: int,
    model: GeneratorModel,
    topology: Topology,
    initial_state: float = 0.1,
    sample: bool = False,
    rng: Optional[np.random.Generator] = None,
    trace: Optional[list] = None,
    forward_state: Optional[ChainState] = None,
) -> tuple[list[Tensor], list[Tensor]]:
    """
    Two n-frame chains: forward from `start` and backward from `end`.

    The backward chain starts from the negated forward state.
    """
    if n < 1:
        raise DatasetError("chain length must be at least 1")
    s_f = forward_state if forward_state is not None else model.initial_state(initial_state)
    s_b = s_f.negated()
    forward = _chain_(start, n, s_f, model, topology, sample, rng, trace)
    backward = _chain_(end, n, s_b, model, topology, sample, rng, trace)
    return forward, backward


def window_loss(
    window: Window,
    model: GeneratorModel,
    topology: Topology,
    cfg: TrainConfig,
    weights: LossWeights,
    rng: Optional[np.random.Generator] = None,
) -> LossReport:
    n = len(window.frames)
    trace: list[LatentRecord] = []
    if cfg.bidirectional:
        forward, backward = bidirectional_rollout(
            window.first, window.last, n, model, topology,
            cfg.initial_state, cfg.sample_latent, rng, trace,
        )
    else:
        state = model.initial_state(cfg.initial_state)
        forward = _chain_(window.first, n, state, model, topology, cfg.sample_latent, rng, trace)
        backward = None
    return compute_loss(forward, backward, window.frames, trace, model, weights)


def loss_weights(cfg: TrainConfig) -> LossWeights:
    return LossWeights(
        bidirection=cfg.alpha1,
        regularization=cfg.alpha2,
        use_kl=cfg.use_kl,
        use_l2=cfg.use_l2,
    )


def run_training(
    model: GeneratorModel,
    segments: Sequence[np.ndarray],
    topology: Topology,
    cfg: TrainConfig,
    weights: LossWeights,
    rng: np.random.Generator,
    start_iteration: int = 0,
    checkpoint_dir: Optional[Path] = None,
    metadata: Optional[dict] = None,
    on_iteration: Optional[Callable[[int, LossReport], None]] = None,
) -> list[tuple[int, LossReport]]:
    """
    Iterate from start_iteration to cfg.iterations; returns (iteration, report) pairs.

    Raises:
        TrainingDivergedError: the batch loss or a gradient became non-finite
    """
    log = []
    for iteration in range(start_iteration, cfg.iterations):
        windows = [sample_window(segments, cfg.sequence_length, rng) for _ in range(cfg.batch_size)]
        model.store.zero_grad()

        with Tape() as tape:
            report = LossReport.average(
                [window_loss(w, model, topology, cfg, weights, rng) for w in windows]
            )
            if not np.isfinite(report.total):
                _diverged_(model, checkpoint_dir, metadata, iteration, "loss is not finite")
            tape.backward(report.graph)

        try:
            adam_step(model.store, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
        except NonFiniteError as exc:
            _diverged_(model, checkpoint_dir, metadata, iteration, str(exc))

        log.append((iteration, report))
        logger.debug(
            "iteration %d: total %.6f rec %.6f bd %.6f kl %.6f l2 %.6f",
            iteration, report.total, report.reconstruct, report.bidirection, report.kl, report.l2,
        )
        if on_iteration is not None:
            on_iteration(iteration, report)

        done = iteration + 1
        if checkpoint_dir is not None and cfg.checkpoint_interval and done % cfg.checkpoint_interval == 0:
            save_checkpoint(
                model,
                Path(checkpoint_dir) / LATEST_CHECKPOINT,
                {**(metadata or {}), "iteration": done, "rng_state": rng.bit_generator.state},
            )
    return log


def _diverged_(
    model: GeneratorModel,
    checkpoint_dir: Optional[Path],
    metadata: Optional[dict],
    iteration: int,
    reason: str,
) -> None:
    # Parameters are still those of the previous iteration here.
    path = None
    if checkpoint_dir is not None:
        path = Path(checkpoint_dir) / LAST_GOOD_CHECKPOINT
        save_checkpoint(model, path, {**(metadata or {}), "iteration": iteration})
    logger.error("Training diverged at iteration %d: %s", iteration, reason)
    raise TrainingDivergedError(f"training diverged at iteration {iteration}: {reason}", path)


def train_loop(
    manifests: Sequence[SequenceManifest],
    cfg: TrainConfig,
    weights: Optional[LossWeights] = None,
    output_dir: Optional[Path] = None,
    resume: Optional[Path] = None,
    on_iteration: Optional[Callable[[int, LossReport], None]] = None,
) -> TrainResult:
    """
    Encode the manifests, then train (or resume training) a generator.

    Checkpoints land in output_dir every cfg.checkpoint_interval iterations.
    """
    data = prepare_dataset(manifests, cfg)
    weights = weights if weights is not None else loss_weights(cfg)
    metadata = {
        "train_config": cfg.to_dict(),
        "normalization": data.context.normalization.to_dict(),
    }

    if resume is not None:
        checkpoint = read_checkpoint(resume)
        model = checkpoint.model
        start = int(checkpoint.metadata.get("iteration", 0))
        rng = np.random.default_rng()
        if "rng_state" in checkpoint.metadata:
            rng.bit_generator.state = checkpoint.metadata["rng_state"]
        logger.info("Resuming from %s at iteration %d", resume, start)
    else:
        model = GeneratorModel(cfg.model_config(data.context.vertex_count), seed=cfg.seed)
        rng = np.random.default_rng([cfg.seed, 1])
        start = 0

    log = run_training(
        model, data.train_segments(), data.context.topology, cfg, weights, rng,
        start_iteration=start, checkpoint_dir=output_dir, metadata=metadata,
        on_iteration=on_iteration,
    )
    return TrainResult(model=model, log=log, data=data)


def write_loss_log(log: Sequence[tuple[int, LossReport]], path: Path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(LOG_COLUMNS)
        for iteration, report in log:
            writer.writerow(report.as_row(iteration))
