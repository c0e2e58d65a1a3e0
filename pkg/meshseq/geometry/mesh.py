"""
Mesh Core

Triangle meshes, Wavefront OBJ input/output, 1-ring topology and cotangent
edge weights. Every other part of meshseq builds on these types.

KEY TYPES:
---------
Mesh:
    - vertices (N×3 float64), faces (F×3 int64), both read-only
Topology:
    - neighbors[i]: sorted 1-ring of vertex i
    - rows/cols: directed edge list (i, j) for every j in neighbors[i]
    - mean_operator: sparse row-normalized adjacency, used by the mesh
      convolution to average neighbor features
CotanWeights:
    - values aligned with Topology.rows/cols, symmetric, floored at 1e-6

USAGE:
-----
    from meshseq.geometry.mesh import load_obj, build_topology, cotangent_weights

    mesh = load_obj(Path("frame_0000.obj"))
    topology = build_topology(mesh)
    weights = cotangent_weights(mesh, topology)
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from ..errors import GeometryError, MeshFormatError, TopologyError

logger = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-6


def _readonly_(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=np.float64)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 3)

        if vertices.ndim != 2 or vertices.shape[1] != 3 or len(vertices) == 0:
            raise MeshFormatError(f"vertices must be an N×3 array, got {vertices.shape}")
        if not np.all(np.isfinite(vertices)):
            raise MeshFormatError("vertex coordinates must be finite")
        if len(faces) and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshFormatError(
                f"face index out of range for {len(vertices)} vertices"
            )
        repeated = (
            (faces[:, 0] == faces[:, 1])
            | (faces[:, 1] == faces[:, 2])
            | (faces[:, 0] == faces[:, 2])
        )
        if np.any(repeated):
            raise MeshFormatError(
                f"degenerate face {int(np.flatnonzero(repeated)[0])} repeats a vertex"
            )

        object.__setattr__(self, "vertices", _readonly_(vertices))
        object.__setattr__(self, "faces", _readonly_(faces))

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        """Same connectivity, new positions."""
        return Mesh(vertices, self.faces)

    def same_connectivity(self, other: "Mesh") -> bool:
        return self.vertex_count == other.vertex_count and np.array_equal(
            self.faces, other.faces
        )


def load_obj(path: Path) -> Mesh:
    """
    Parse a Wavefront OBJ file into a Mesh.

    Only 'v' and 'f' records are used. Face tokens may carry texture and
    normal indices ("7/3/7"); only the vertex index is kept. Negative
    indices are resolved relative to the vertices read so far.

    Raises:
        MeshFormatError: non-triangular faces, unparsable records,
            out-of-range indices or degenerate faces
    """
    path = Path(path)
    vertices: list[list[float]] = []
    faces: list[list[int]] = []

    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *fields = line.split()

        if tag == "v":
            if len(fields) < 3:
                raise MeshFormatError(f"{path}:{lineno}: vertex needs 3 coordinates")
            try:
                vertices.append([float(value) for value in fields[:3]])
            except ValueError as exc:
                raise MeshFormatError(f"{path}:{lineno}: {exc}") from exc

        elif tag == "f":
            if len(fields) != 3:
                raise MeshFormatError(
                    f"{path}:{lineno}: face with {len(fields)} vertices, "
                    "only triangles are supported"
                )
            face = []
            for token in fields:
                try:
                    index = int(token.split("/")[0])
                except ValueError as exc:
                    raise MeshFormatError(f"{path}:{lineno}: {exc}") from exc
                if index < 0:
                    index = len(vertices) + index + 1
                if index < 1 or index > len(vertices):
                    raise MeshFormatError(
                        f"{path}:{lineno}: vertex index {token} out of range"
                    )
                face.append(index - 1)
            faces.append(face)

    if not vertices:
        raise MeshFormatError(f"{path}: no vertices found")

    mesh = Mesh(np.asarray(vertices), np.asarray(faces, dtype=np.int64))
    logger.debug("Loaded %s: %d vertices, %d faces", path, mesh.vertex_count, mesh.face_count)
    return mesh


def save_obj(mesh: Mesh, path: Path) -> None:
    """Write a mesh as OBJ with 17 significant digits so positions reload bit-exactly."""
    path = Path(path)
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    path.write_text("\n".join(lines) + "\n")
    logger.debug("Saved %s", path)


@dataclass(frozen=True, eq=False)
class Topology:
    """1-ring neighborhoods of a mesh."""

    neighbors: tuple
    rows: np.ndarray
    cols: np.ndarray
    mean_operator: sparse.csr_matrix = field(repr=False)

    @property
    def vertex_count(self) -> int:
        return len(self.neighbors)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.mean_operator.indptr)

    @property
    def edges(self) -> np.ndarray:
        """Undirected edges as an E×2 array with i < j."""
        mask = self.rows < self.cols
        return np.stack([self.rows[mask], self.cols[mask]], axis=1)


def build_topology(mesh: Mesh) -> Topology:
    """
    Build sorted, duplicate-free 1-ring neighborhoods from the face list.

    Raises:
        TopologyError: a vertex is referenced by no face
    """
    n = mesh.vertex_count
    faces = mesh.faces
    i = np.concatenate([faces[:, 0], faces[:, 1], faces[:, 2]])
    j = np.concatenate([faces[:, 1], faces[:, 2], faces[:, 0]])
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])

    adjacency = sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n, n)
    )
    adjacency.sum_duplicates()
    adjacency.sort_indices()

    degrees = np.diff(adjacency.indptr)
    isolated = np.flatnonzero(degrees == 0)
    if len(isolated):
        raise TopologyError(f"vertex {int(isolated[0])} belongs to no face")

    indptr = adjacency.indptr
    neighbors = tuple(
        _readonly_(adjacency.indices[indptr[v] : indptr[v + 1]].astype(np.int64))
        for v in range(n)
    )
    directed_rows = np.repeat(np.arange(n, dtype=np.int64), degrees)
    directed_cols = adjacency.indices.astype(np.int64)

    mean_operator = sparse.csr_matrix(
        (1.0 / degrees[directed_rows], adjacency.indices, adjacency.indptr),
        shape=(n, n),
    )
    return Topology(
        neighbors=neighbors,
        rows=_readonly_(directed_rows),
        cols=_readonly_(directed_cols),
        mean_operator=mean_operator,
    )


@dataclass(frozen=True, eq=False)
class CotanWeights:
    """Symmetric per-edge cotangent weights aligned with Topology.rows/cols."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    matrix: sparse.csr_matrix = field(repr=False)

    def weight(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])


def cotangent_weights(mesh: Mesh, topology: Topology) -> CotanWeights:
    """
    c_ij = ½(cot α_ij + cot β_ij) over the angles opposite edge (i, j).

    Boundary edges get the single available half-cotangent. Weights below
    WEIGHT_FLOOR (obtuse or right angles) are raised to it.

    Raises:
        GeometryError: a face has zero area
    """
    v = mesh.vertices
    faces = mesh.faces

    e1 = v[faces[:, 1]] - v[faces[:, 0]]
    e2 = v[faces[:, 2]] - v[faces[:, 0]]
    double_area = np.linalg.norm(np.cross(e1, e2), axis=1)
    longest = np.max(
        [
            np.einsum("ij,ij->i", e, e)
            for e in (e1, e2, v[faces[:, 2]] - v[faces[:, 1]])
        ],
        axis=0,
    )
    degenerate = double_area <= 1e-12 * longest
    if np.any(degenerate):
        raise GeometryError(f"face {int(np.flatnonzero(degenerate)[0])} has zero area")

    edge_i, edge_j, halves = [], [], []
    for corner in range(3):
        a = faces[:, (corner + 1) % 3]
        b = faces[:, (corner + 2) % 3]
        u = v[a] - v[faces[:, corner]]
        w = v[b] - v[faces[:, corner]]
        cot = np.einsum("ij,ij->i", u, w) / double_area
        edge_i += [a, b]
        edge_j += [b, a]
        halves += [0.5 * cot, 0.5 * cot]

    n = mesh.vertex_count
    summed = sparse.csr_matrix(
        (np.concatenate(halves), (np.concatenate(edge_i), np.concatenate(edge_j))),
        shape=(n, n),
    )
    values = np.asarray(summed[topology.rows, topology.cols]).ravel()
    floored = int(np.count_nonzero(values < WEIGHT_FLOOR))
    if floored:
        logger.debug("Floored %d directed cotangent weights to %g", floored, WEIGHT_FLOOR)
    values = np.maximum(values, WEIGHT_FLOOR)

    matrix = sparse.csr_matrix((values, (topology.rows, topology.cols)), shape=(n, n))
    return CotanWeights(
        rows=topology.rows,
        cols=topology.cols,
        values=_readonly_(values),
        matrix=matrix,
    )


def vertex_normals(mesh: Mesh) -> np.ndarray:
    """Area-weighted unit vertex normals (zero where all incident faces are degenerate)."""
    v = mesh.vertices
    faces = mesh.faces
    face_normals = np.cross(v[faces[:, 1]] - v[faces[:, 0]], v[faces[:, 2]] - v[faces[:, 0]])
    normals = np.zeros_like(v)
    for corner in range(3):
        np.add.at(normals, faces[:, corner], face_normals)
    lengths = np.linalg.norm(normals, axis=1)
    safe = lengths > 0
    normals[safe] /= lengths[safe, None]
    return normals


def bounding_box_diagonal(vertices: np.ndarray) -> float:
    vertices = np.asarray(vertices)
    return float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0)))
