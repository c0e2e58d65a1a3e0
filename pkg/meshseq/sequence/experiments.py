"""
Experiments

Desk-scale trend checks on synthetic periodic data. Every experiment
returns an ExperimentReport: the measured values plus one boolean per
criterion.

EXPERIMENTS:
-----------
- overfit:        one 32-frame sequence; final L_rec ≤ 5% of its
                  iteration-10 value, and a rollout from 2 initial frames
                  stays within 5% of the bounding-box diagonal on every frame
- initial-frames: three sequences with held-out stretches; 3 initial frames
                  beat 1 initial frame for a majority of seeds
- no-freeze:      64-frame rollout of the overfit model; mean feature change
                  over the last 16 frames ≥ 0.25 × the first 16
- baseline:       15-step linear feature extrapolation is worse than the
                  overfit model's rollout

Synthetic sequences are written under a work directory and trained through
the regular train_loop pipeline.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ..config import TrainConfig, load_train_config
from ..errors import ConfigError
from ..geometry.codec import FeatureFrame
from ..geometry.context import CodecContext
from ..geometry.mesh import Mesh, bounding_box_diagonal
from ..network.model import GeneratorModel
from ..training.losses import LossReport
from ..training.trainer import train_loop
from ..utils.manifest import SequenceManifest
from .completion import baseline_linear
from .evaluation import eval_position_error, feature_change_curve
from .generation import generate_features
from .synthetic import synth_dataset

logger = logging.getLogger(__name__)

EXPERIMENTS = ("overfit", "initial-frames", "no-freeze", "baseline")

# Used when no config file is given
EXPERIMENT_CONFIG = {
    "iterations": 2000,
    "batch_size": 4,
    "sequence_length": 16,
    "checkpoint_interval": 0,
    "conv_channels": [9, 16, 32],
    "latent_dim": 32,
    "lstm_layers": 1,
    "lstm_hidden": 64,
}

KIND = "bend-bar"
RINGS = 6
SEGMENTS = 8
OVERFIT_FRAMES = 32
OVERFIT_PERIOD = 16.0
TREND_PERIODS = (12.0, 16.0, 20.0)
TREND_FRAMES = 48
TREND_SEEDS = (0, 1, 2, 3, 4)

OnIteration = Optional[Callable[[int, LossReport], None]]


@dataclass
class ExperimentReport:
    name: str
    values: dict = field(default_factory=dict)
    criteria: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.criteria.values())

    def to_dict(self) -> dict:
        return {
            "experiment": self.name,
            "passed": self.passed,
            "values": self.values,
            "criteria": self.criteria,
        }


@dataclass
class OverfitRun:
    """A model trained on every frame of one sequence, with that sequence."""

    model: GeneratorModel
    context: CodecContext
    features: np.ndarray
    meshes: list
    log: list
    cfg: TrainConfig

    def raw_features(self, index: int) -> np.ndarray:
        return self.context.denormalize(FeatureFrame(self.features[index], normalized=True)).features


def experiment_config(path: Optional[Path] = None, **overrides) -> TrainConfig:
    """
    EXPERIMENT_CONFIG, or the config file in its place, then the overrides
    that are not None.
    """
    values = {} if path is not None else dict(EXPERIMENT_CONFIG)
    values.update({key: value for key, value in overrides.items() if value is not None})
    return load_train_config(path, **values)


def _write_sequences_(work_dir: Path, periods: Sequence[float], frames: int) -> list[SequenceManifest]:
    return [
        synth_dataset(KIND, Path(work_dir) / f"{KIND}-{index}", frames, period, None, RINGS, SEGMENTS)
        for index, period in enumerate(periods)
    ]


def _decode_(context: CodecContext, features: Sequence[np.ndarray], truth: Sequence[Mesh]) -> list[Mesh]:
    # Vertex 0 sits on the fixed base ring, so the ground truth supplies the anchor.
    return [
        context.decode_mesh(FeatureFrame(f, normalized=True), mesh.vertices[0])
        for f, mesh in zip(features, truth)
    ]


def train_overfit(cfg: TrainConfig, work_dir: Path, on_iteration: OnIteration = None) -> OverfitRun:
    """Train on one 32-frame sequence with nothing held out."""
    cfg = replace(cfg, test_fraction=0.0)
    manifest = _write_sequences_(work_dir, [OVERFIT_PERIOD], OVERFIT_FRAMES)[0]
    result = train_loop([manifest], cfg, on_iteration=on_iteration)
    return OverfitRun(
        model=result.model,
        context=result.data.context,
        features=result.data.sequences[0],
        meshes=manifest.load_frames(),
        log=result.log,
        cfg=cfg,
    )


def overfit_experiment(run: OverfitRun, threshold: float = 0.05) -> ExperimentReport:
    """
    L_rec shrinkage and rollout fidelity on the training sequence.

    "Final" L_rec is the mean over the last 10 iterations, since every
    iteration samples different windows.
    """
    reference = run.log[min(10, len(run.log) - 1)][1].reconstruct
    final = float(np.mean([report.reconstruct for _, report in run.log[-10:]]))

    n = len(run.meshes) - 2
    generated = generate_features(run.model, run.features[:2], n, run.context.topology, run.cfg.initial_state)
    truth = run.meshes[2:]
    errors = eval_position_error(_decode_(run.context, generated, truth), truth).per_frame_error
    relative = errors / np.array([bounding_box_diagonal(mesh.vertices) for mesh in truth])

    rec_ratio = final / reference if reference > 0 else float("inf")
    report = ExperimentReport(
        "overfit",
        values={
            "reference_rec": float(reference),
            "final_rec": final,
            "rec_ratio": float(rec_ratio),
            "max_rollout_error_ratio": float(relative.max()),
            "mean_rollout_error": float(errors.mean()),
        },
        criteria={
            "rec_ratio <= 0.05": bool(rec_ratio <= threshold),
            "rollout error <= 5% of bbox diagonal": bool(relative.max() <= threshold),
        },
    )
    logger.info("overfit: rec ratio %.4f, worst rollout ratio %.4f", rec_ratio, relative.max())
    return report


def no_freeze_experiment(
    run: OverfitRun, frames: int = 64, window: int = 16, threshold: float = 0.25
) -> ExperimentReport:
    """The feature change of a long rollout does not die out."""
    generated = generate_features(run.model, run.features[:2], frames, run.context.topology, run.cfg.initial_state)
    raw = [run.context.denormalize(FeatureFrame(f, normalized=True)).features for f in generated]
    curve = feature_change_curve(raw)
    first = float(np.mean(curve[:window]))
    last = float(np.mean(curve[-window:]))
    ratio = last / first if first > 0 else float("inf")
    logger.info("no-freeze: change ratio %.4f", ratio)
    return ExperimentReport(
        "no-freeze",
        values={"first_change": first, "last_change": last, "ratio": ratio},
        criteria={"last/first change >= 0.25": bool(ratio >= threshold)},
    )


def baseline_experiment(run: OverfitRun, horizon: int = 15, start: int = 0) -> ExperimentReport:
    """Linear extrapolation in feature space against the model, over the same frames."""
    truth = run.meshes[start + 2 : start + 2 + horizon]
    if len(truth) < horizon:
        raise ConfigError(f"sequence too short for a {horizon}-step comparison from frame {start}")

    linear = baseline_linear(run.raw_features(start), run.raw_features(start + 1), horizon, "extrapolate")
    linear_meshes = [
        run.context.decode_mesh(FeatureFrame(f), mesh.vertices[0]) for f, mesh in zip(linear, truth)
    ]
    generated = generate_features(
        run.model, run.features[start : start + 2], horizon, run.context.topology, run.cfg.initial_state
    )

    linear_error = eval_position_error(linear_meshes, truth).mean_error
    model_error = eval_position_error(_decode_(run.context, generated, truth), truth).mean_error
    logger.info("baseline: linear %.5f, model %.5f", linear_error, model_error)
    return ExperimentReport(
        "baseline",
        values={"linear_error": linear_error, "model_error": model_error, "horizon": horizon},
        criteria={"linear error > model error": bool(linear_error > model_error)},
    )


def _held_out_errors_(result, manifests: Sequence[SequenceManifest], cfg: TrainConfig) -> dict:
    """Mean position error over the held-out stretches with 1 and 3 initial frames."""
    errors = {1: [], 3: []}
    data = result.data
    for sequence, split, context, manifest in zip(data.sequences, data.splits, data.contexts, manifests):
        if len(split.test) < 4:
            continue
        test = sequence[split.test.start : split.test.stop]
        truth = manifest.load_frames()[split.test.start : split.test.stop][3:]
        for u in errors:
            generated = generate_features(
                result.model, test[3 - u : 3], len(truth), context.topology, cfg.initial_state
            )
            errors[u].append(eval_position_error(_decode_(context, generated, truth), truth).mean_error)
    if not errors[1]:
        raise ConfigError("held-out stretches are too short to compare initial frames")
    return {u: float(np.mean(values)) for u, values in errors.items()}


def initial_frames_experiment(
    cfg: TrainConfig,
    work_dir: Path,
    seeds: Sequence[int] = TREND_SEEDS,
    on_iteration: OnIteration = None,
) -> ExperimentReport:
    """Warming up on 3 frames beats starting from 1, for a majority of seeds."""
    if cfg.test_fraction == 0:
        cfg = replace(cfg, test_fraction=0.25)
    manifests = _write_sequences_(work_dir, TREND_PERIODS, TREND_FRAMES)

    runs = []
    for seed in seeds:
        seeded = replace(cfg, seed=seed)
        result = train_loop(manifests, seeded, on_iteration=on_iteration)
        errors = _held_out_errors_(result, manifests, seeded)
        runs.append({"seed": seed, "error_u1": errors[1], "error_u3": errors[3]})
        logger.info("initial-frames seed %d: u=1 %.5f, u=3 %.5f", seed, errors[1], errors[3])

    wins = sum(run["error_u3"] <= run["error_u1"] for run in runs)
    return ExperimentReport(
        "initial-frames",
        values={"runs": runs, "wins": wins, "seeds": len(runs)},
        criteria={"u=3 error <= u=1 error for a majority of seeds": bool(2 * wins > len(runs))},
    )


def run_experiment(
    name: str, cfg: TrainConfig, work_dir: Path, on_iteration: OnIteration = None
) -> ExperimentReport:
    """
    Run one named experiment.

    Raises:
        ConfigError: unknown experiment name
    """
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{name}'; choose from {', '.join(EXPERIMENTS)}")
    if name == "initial-frames":
        return initial_frames_experiment(cfg, work_dir, on_iteration=on_iteration)

    run = train_overfit(cfg, work_dir, on_iteration)
    if name == "overfit":
        return overfit_experiment(run)
    if name == "no-freeze":
        return no_freeze_experiment(run)
    return baseline_experiment(run)
