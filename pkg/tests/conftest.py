"""
meshseq Test Configuration

Shared fixtures: small meshes, a tiny generator model and synthetic datasets.
"""
import pytest
import numpy as np
from pathlib import Path

from meshseq.geometry.mesh import Mesh
from meshseq.geometry.context import CodecContext
from meshseq.network.model import GeneratorModel, ModelConfig
from meshseq.sequence.synthetic import synth_dataset
from meshseq.config import load_train_config


# ============================================================
# MESHES
# ============================================================

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0

ICOSAHEDRON_VERTICES = [
    (-1, GOLDEN, 0), (1, GOLDEN, 0), (-1, -GOLDEN, 0), (1, -GOLDEN, 0),
    (0, -1, GOLDEN), (0, 1, GOLDEN), (0, -1, -GOLDEN), (0, 1, -GOLDEN),
    (GOLDEN, 0, -1), (GOLDEN, 0, 1), (-GOLDEN, 0, -1), (-GOLDEN, 0, 1),
]

ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


@pytest.fixture
def triangle():
    """A single right triangle in the xy plane."""
    return Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


@pytest.fixture
def unit_square():
    """Unit square split along the 0-2 diagonal."""
    return Mesh(
        [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]],
        [[0, 1, 2], [0, 2, 3]],
    )


@pytest.fixture
def icosahedron():
    """Closed 12-vertex mesh made of equilateral triangles."""
    return Mesh(np.asarray(ICOSAHEDRON_VERTICES, dtype=np.float64), ICOSAHEDRON_FACES)


@pytest.fixture
def ico_context(icosahedron):
    return CodecContext.from_reference(icosahedron)


@pytest.fixture
def random_graph_mesh():
    """
    Factory for meshes with 4..50 vertices whose faces are arbitrary
    triangles: a chain that touches every vertex plus random extras.
    """
    def build(rng):
        n = int(rng.integers(4, 51))
        order = rng.permutation(n)
        faces = [(order[i], order[(i + 1) % n], order[(i + 2) % n]) for i in range(n)]
        faces += [tuple(rng.choice(n, 3, replace=False)) for _ in range(int(rng.integers(0, 2 * n)))]
        return Mesh(rng.normal(size=(n, 3)), faces)

    return build


@pytest.fixture
def dense_adjacency():
    """0/1 vertex adjacency from the face edges, as a dense matrix."""
    def build(mesh):
        n = mesh.vertex_count
        adjacency = np.zeros((n, n))
        for a, b, c in mesh.faces:
            for i, j in ((a, b), (b, c), (c, a)):
                adjacency[i, j] = adjacency[j, i] = 1.0
        return adjacency

    return build


@pytest.fixture
def obj_file(tmp_path):
    """Write OBJ text to a temp file and return its path."""
    def write(text: str, name: str = "mesh.obj") -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path
    return write


# ============================================================
# MODEL
# ============================================================

@pytest.fixture
def tiny_config():
    """Generator small enough for finite differences (12 vertices)."""
    return ModelConfig(
        vertex_count=12,
        conv_channels=(9, 4, 3),
        latent_dim=5,
        lstm_layers=2,
        lstm_hidden=6,
    )


@pytest.fixture
def tiny_model(tiny_config):
    return GeneratorModel(tiny_config, seed=3)


@pytest.fixture
def feature_frames():
    """Random 12×9 feature frames in normalized range."""
    rng = np.random.default_rng(11)
    return [rng.uniform(-0.5, 0.5, size=(12, 9)) for _ in range(6)]


# ============================================================
# SYNTHETIC DATA
# ============================================================

@pytest.fixture
def bend_dataset(tmp_path):
    """40-frame bending bar with 18 vertices, written to disk with its manifest."""
    return synth_dataset(
        "bend-bar", tmp_path / "bend", frames=40, period=20.0, rings=4, segments=4
    )


@pytest.fixture
def tiny_train_config():
    """Training config sized for a few fast iterations."""
    return load_train_config(
        iterations=4,
        batch_size=2,
        sequence_length=4,
        test_fraction=0.25,
        checkpoint_interval=2,
        conv_channels=[9, 4, 3],
        latent_dim=5,
        lstm_layers=1,
        lstm_hidden=6,
        seed=7,
    )
