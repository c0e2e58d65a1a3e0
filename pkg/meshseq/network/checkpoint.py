"""
Model Checkpoints (MSQC)

Binary, little-endian, self-describing: a checkpoint restores the model
(and its optimizer moments) without the training config file.

LAYOUT:
------
    magic        4 bytes  b"MSQC"
    version      u32
    meta_len     u32
    meta         JSON (model config, Adam step, caller metadata)
    count        u32
    count × tensor record:
        name_len u16, name (utf-8)
        kind     u8   0 = parameter, 1 = Adam m, 2 = Adam v
        decay    u8
        ndim     u8, dims u32 × ndim
        payload  float64 × prod(dims)
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..autodiff.params import ParamStore
from ..errors import CheckpointError, MeshSeqError
from .model import GeneratorModel, ModelConfig

logger = logging.getLogger(__name__)

MAGIC = b"MSQC"
VERSION = 1
KIND_PARAM, KIND_M, KIND_V = 0, 1, 2


@dataclass
class CheckpointData:
    model: GeneratorModel
    metadata: dict = field(default_factory=dict)


def _pack_tensor_(name: str, kind: int, decay: bool, array: np.ndarray) -> bytes:
    encoded = name.encode("utf-8")
    header = struct.pack("<H", len(encoded)) + encoded
    header += struct.pack("<BBB", kind, int(decay), array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array, dtype="<f8").tobytes()


def save_checkpoint(model: GeneratorModel, path: Path, metadata: Optional[dict] = None) -> None:
    """Write parameters, Adam moments and metadata to `path`."""
    store = model.store
    meta = {
        "model": model.config.to_dict(),
        "adam_step": store.step,
        "metadata": metadata or {},
    }
    meta_bytes = json.dumps(meta).encode("utf-8")

    records = []
    for name, tensor in store.items():
        decay = store.decays(name)
        records.append(_pack_tensor_(name, KIND_PARAM, decay, tensor.data))
        records.append(_pack_tensor_(name, KIND_M, decay, store.m[name]))
        records.append(_pack_tensor_(name, KIND_V, decay, store.v[name]))

    blob = b"".join(
        [
            MAGIC,
            struct.pack("<II", VERSION, len(meta_bytes)),
            meta_bytes,
            struct.pack("<I", len(records)),
            *records,
        ]
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)
    logger.info("Saved checkpoint %s (%d parameters)", path, store.num_parameters())


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.blob):
            raise CheckpointError("checkpoint is truncated")
        chunk = self.blob[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path: Path) -> CheckpointData:
    """
    Parse a checkpoint completely before building the model.

    Raises:
        CheckpointError: bad magic, unsupported version, truncation or
            tensors that do not match the stored model config
    """
    path = Path(path)
    try:
        reader = _Reader(path.read_bytes())
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc

    if reader.take(4) != MAGIC:
        raise CheckpointError(f"{path} is not a meshseq checkpoint")
    version, meta_len = reader.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        meta = json.loads(reader.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint metadata: {exc}") from exc

    (count,) = reader.unpack("<I")
    store = ParamStore()
    moments = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        kind, decay, ndim = reader.unpack("<BBB")
        shape = reader.unpack(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        array = np.frombuffer(reader.take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
        if kind == KIND_PARAM:
            store.add(name, array, decay=bool(decay))
        elif kind in (KIND_M, KIND_V):
            moments[(name, kind)] = array
        else:
            raise CheckpointError(f"unknown tensor kind {kind}")
    if reader.offset != len(reader.blob):
        raise CheckpointError("trailing bytes after checkpoint records")

    for (name, kind), array in moments.items():
        if name not in store:
            raise CheckpointError(f"moment for unknown parameter '{name}'")
        (store.m if kind == KIND_M else store.v)[name] = array
    store.step = int(meta.get("adam_step", 0))

    try:
        model = GeneratorModel(ModelConfig.from_dict(meta["model"]), store=store)
    except (KeyError, MeshSeqError) as exc:
        raise CheckpointError(f"checkpoint does not describe a valid model: {exc}") from exc
    return CheckpointData(model=model, metadata=meta.get("metadata", {}))


def load_checkpoint(path: Path) -> GeneratorModel:
    return read_checkpoint(path).model
