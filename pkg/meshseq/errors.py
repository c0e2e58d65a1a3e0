"""
meshseq Exceptions

Every failure raised by the library derives from MeshSeqError so the CLI
can turn it into a one-line diagnostic (see utils/decorators.py).

HIERARCHY:
---------
MeshSeqError
├── MeshFormatError        OBJ parsing, degenerate faces, index range
├── TopologyError          isolated vertices, connectivity mismatch, disconnected systems
├── GeometryError          zero-area faces, collapsed deformation gradients
├── ReconstructionError    solver residual above tolerance
├── NormalizationError     empty fit input, wrong normalized state
├── ShapeMismatchError     tensor / feature / vertex count mismatch
├── GraphError             non-scalar loss, loss not recorded on the tape
├── NonFiniteError         NaN or infinite activations, features, gradients
├── FeatureFormatError     MSQF files and feature sidecars
├── CheckpointError        MSQC files
├── ConfigError            training configuration
├── DatasetError           sequences too short, empty inputs
└── TrainingDivergedError  NaN training loss
"""

from pathlib import Path
from typing import Optional


class MeshSeqError(Exception):
    """Base exception for meshseq."""


class MeshFormatError(MeshSeqError):
    """Raised when an OBJ file cannot be turned into a valid triangle mesh."""


class TopologyError(MeshSeqError):
    """Raised when mesh connectivity violates a structural requirement."""


class GeometryError(MeshSeqError):
    """Raised for degenerate geometry (zero-area faces, collapsed gradients)."""


class ReconstructionError(MeshSeqError):
    """Raised when the position solve does not reach its residual tolerance."""


class NormalizationError(MeshSeqError):
    """Raised for invalid normalization inputs or frame states."""


class ShapeMismatchError(MeshSeqError):
    """Raised when array or tensor shapes do not agree."""


class GraphError(MeshSeqError):
    """Raised for invalid use of the differentiation tape."""


class NonFiniteError(MeshSeqError):
    """Raised when NaN or infinite values appear where finite ones are required."""


class FeatureFormatError(MeshSeqError):
    """Raised when a feature file or its sidecar is malformed."""


class CheckpointError(MeshSeqError):
    """Raised when a checkpoint cannot be read."""


class ConfigError(MeshSeqError):
    """Raised for unknown or invalid configuration values."""


class DatasetError(MeshSeqError):
    """Raised when a dataset cannot provide the requested windows."""


class TrainingDivergedError(MeshSeqError):
    """Raised when the training loss stops being finite."""

    def __init__(self, message: str, checkpoint: Optional[Path] = None):
        super().__init__(message)
        self.checkpoint = checkpoint
