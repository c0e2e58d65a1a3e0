"""
Training data: encode manifests, split off a held-out stretch, sample windows.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..config import TrainConfig
from ..errors import DatasetError
from ..geometry.context import CodecContext
from ..geometry.normalization import fit_normalization
from ..utils.manifest import SequenceManifest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetSplit:
    """Frame index ranges of one sequence: train segments and the held-out test stretch."""

    train: tuple
    test: range

    @property
    def train_frame_count(self) -> int:
        return sum(len(r) for r in self.train)


@dataclass(frozen=True)
class Window:
    segment: int
    start: int
    frames: np.ndarray

    @property
    def first(self) -> np.ndarray:
        return self.frames[0]

    @property
    def last(self) -> np.ndarray:
        return self.frames[-1]


def split_frames(count: int, sequence_length: int, test_fraction: float, seed: int) -> DatasetSplit:
    """
    Hold out one contiguous stretch of round(fraction·count) frames.

    The stretch start is drawn uniformly among positions that leave at
    least one train segment able to hold a full window. A fraction of 0
    keeps every frame for training.

    Raises:
        DatasetError: fewer than 2n frames (or n frames when nothing is held out)
    """
    n = sequence_length
    if test_fraction == 0:
        if count < n:
            raise DatasetError(f"{count} frames cannot hold a window of {n}")
        return DatasetSplit(train=(range(0, count),), test=range(0, 0))

    if count < 2 * n:
        raise DatasetError(f"{count} frames after subsampling, need at least {2 * n}")
    test_length = max(1, int(round(test_fraction * count)))
    starts = [
        s for s in range(count - test_length + 1) if max(s, count - s - test_length) >= n
    ]
    if not starts:
        raise DatasetError(f"no split of {count} frames leaves a window of {n}")

    rng = np.random.default_rng(seed)
    start = starts[int(rng.integers(len(starts)))]
    train = tuple(
        r for r in (range(0, start), range(start + test_length, count)) if len(r)
    )
    return DatasetSplit(train=train, test=range(start, start + test_length))


def split_dataset(manifest: SequenceManifest, cfg: TrainConfig) -> DatasetSplit:
    count = len(manifest.effective_frames(cfg.subsample_stride))
    return split_frames(count, cfg.sequence_length, cfg.test_fraction, cfg.seed)


def sample_window(segments: Sequence[np.ndarray], n: int, rng: np.random.Generator) -> Window:
    """
    Uniformly pick a window of n consecutive frames from any segment.

    Raises:
        DatasetError: no segment holds n frames
    """
    candidates = [
        (index, start)
        for index, segment in enumerate(segments)
        for start in range(len(segment) - n + 1)
    ]
    if not candidates:
        raise DatasetError(f"window of {n} frames is longer than every train segment")
    index, start = candidates[int(rng.integers(len(candidates)))]
    return Window(segment=index, start=start, frames=np.asarray(segments[index][start : start + n]))


@dataclass
class TrainingData:
    contexts: list
    sequences: list
    splits: list

    @property
    def context(self) -> CodecContext:
        return self.contexts[0]

    def train_segments(self) -> list[np.ndarray]:
        return [
            sequence[r.start : r.stop]
            for sequence, split in zip(self.sequences, self.splits)
            for r in split.train
        ]

    def test_segments(self) -> list[np.ndarray]:
        return [
            sequence[split.test.start : split.test.stop]
            for sequence, split in zip(self.sequences, self.splits)
            if len(split.test)
        ]


def prepare_dataset(manifests: Sequence[SequenceManifest], cfg: TrainConfig) -> TrainingData:
    """
    Encode every manifest against its own reference, split each sequence,
    and fit one normalization over all training frames.

    Raises:
        DatasetError: no manifests, or sequences too short to split
        TopologyError: manifests whose connectivity differs from the first
    """
    if not manifests:
        raise DatasetError("at least one manifest is required")

    contexts, encoded, splits = [], [], []
    for manifest in manifests:
        context = CodecContext.from_reference(manifest.load_reference())
        if contexts:
            contexts[0].check_mesh(context.reference)
        frames = context.encode_sequence(manifest.load_frames(cfg.subsample_stride), normalize=False)
        split = split_frames(len(frames), cfg.sequence_length, cfg.test_fraction, cfg.seed)
        logger.info(
            "Encoded %d frames from %s (%d train, %d test)",
            len(frames), manifest.reference, split.train_frame_count, len(split.test),
        )
        contexts.append(context)
        encoded.append(frames)
        splits.append(split)

    train_frames = [
        frames[i] for frames, split in zip(encoded, splits) for r in split.train for i in r
    ]
    params = fit_normalization(train_frames, cfg.normalization)
    contexts = [context.with_normalization(params) for context in contexts]
    sequences = [
        np.stack([context.normalize(frame).features for frame in frames])
        for context, frames in zip(contexts, encoded)
    ]
    return TrainingData(contexts=contexts, sequences=sequences, splits=splits)
