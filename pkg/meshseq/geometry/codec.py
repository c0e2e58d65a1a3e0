"""
Deformation Codec

Converts a deformed mesh into a per-vertex 9-D rotation/scale feature and
back, relative to a fixed reference mesh with the same connectivity.

PIPELINE:
--------
    deformed mesh
         ↓  compute_deform_gradients   (per-vertex 3×3 D_i, cotangent-weighted fit)
    D_i
         ↓  polar_decompose            (D = R S, R proper rotation)
    R_i, S_i
         ↓  consistent_axis_angle      (log-rotation branch chosen along the 1-ring graph)
    ω_i θ_i, S_i
         ↓  assemble_feature           (N × 9 FeatureFrame)

    decode_feature inverts the last three steps; reconstruct_positions solves
    a sparse linear system for the positions whose edges best match D_i.

FEATURE LAYOUT (per vertex):
---------------------------
    [ωθ_x, ωθ_y, ωθ_z, s11, s12, s13, s22, s23, s33]

KEY CLASSES:
-----------
DeformationCodec:
    - compute_deform_gradients(reference, deformed, topology, weights)
    - polar_decompose(matrices) → (R, S)
    - consistent_axis_angle(R, S, topology, previous) → RotScaleField
    - assemble_feature(field) → FeatureFrame
    - decode_feature(frame) → DeformGradientField
    - reconstruct_positions(field, reference, topology, weights, anchor)
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import factorized
from scipy.spatial.transform import Rotation

from ..errors import (
    GeometryError,
    NonFiniteError,
    NormalizationError,
    ReconstructionError,
    ShapeMismatchError,
    TopologyError,
)
from .mesh import CotanWeights, Mesh, Topology, vertex_normals

logger = logging.getLogger(__name__)

FEATURE_CHANNELS = 9
TWO_PI = 2.0 * np.pi
DEFAULT_AXIS = np.array([0.0, 0.0, 1.0])

# Singular-value ratio under which a deformation gradient counts as collapsed
COLLAPSE_RATIO = 1e-12
# Eigenvalue ratio under which a 1-ring counts as planar and gets a normal pseudo-edge
PLANAR_RATIO = 1e-6
# Eigenvalue ratio under which the gradient system gets a Tikhonov term
RANK_RATIO = 1e-12
TIKHONOV = 1e-6
RESIDUAL_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class DeformGradientField:
    """Per-vertex 3×3 deformation gradients (N×3×3)."""

    matrices: np.ndarray

    @property
    def vertex_count(self) -> int:
        return len(self.matrices)


@dataclass(frozen=True, eq=False)
class RotScaleField:
    """Per-vertex rotation (axis, angle) and symmetric scale/shear."""

    rotations: np.ndarray
    scales: np.ndarray
    axes: np.ndarray
    angles: np.ndarray

    @property
    def log_rotations(self) -> np.ndarray:
        return self.axes * self.angles[:, None]

    @property
    def vertex_count(self) -> int:
        return len(self.angles)


@dataclass(frozen=True, eq=False)
class FeatureFrame:
    """One N×9 feature frame; `normalized` records which space it lives in."""

    features: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != FEATURE_CHANNELS:
            raise ShapeMismatchError(
                f"feature frame must be N×{FEATURE_CHANNELS}, got {features.shape}"
            )
        object.__setattr__(self, "features", features)

    @property
    def vertex_count(self) -> int:
        return len(self.features)


def _nearest_branch_(rotvec: np.ndarray, angle: float, target: Optional[np.ndarray]) -> np.ndarray:
    """Among ω(θ + 2πk), k ∈ ℤ, return the rotation vector closest to target."""
    if target is None:
        return rotvec
    if angle < 1e-12:
        length = float(np.linalg.norm(target))
        if length < 1e-12:
            return np.zeros(3)
        turns = round(length / TWO_PI)
        return target / length * (TWO_PI * turns)
    axis = rotvec / angle
    k = round((float(axis @ target) - angle) / TWO_PI)
    return axis * (angle + TWO_PI * k)


class DeformationCodec:
    """Mesh ↔ rotation/scale feature conversion."""

    @staticmethod
    def compute_deform_gradients(
        reference: Mesh, deformed: Mesh, topology: Topology, weights: CotanWeights
    ) -> DeformGradientField:
        """
        Per-vertex D_i minimizing Σ_j c_ij ‖e'_ij − D_i e_ij‖² over the 1-ring.

        Planar neighborhoods (reference scatter eigenvalue ratio below
        PLANAR_RATIO) also carry one pseudo-edge along the vertex normal,
        scaled by the mean ring edge length, so that they still determine the
        out-of-plane column of D_i. Other rings are solved from their edges
        alone. Rigid motions, uniform scaling and the identity are exact
        minimizers. Systems that remain rank-deficient receive a λI term with
        λ = 1e-6·trace/3.

        Raises:
            TopologyError: the meshes do not share connectivity
            GeometryError: a neighborhood system cannot be solved
        """
        if not reference.same_connectivity(deformed):
            raise TopologyError("reference and deformed meshes have different connectivity")

        n = reference.vertex_count
        rows, cols, c = topology.rows, topology.cols, weights.values
        e_ref = reference.vertices[rows] - reference.vertices[cols]
        e_def = deformed.vertices[rows] - deformed.vertices[cols]

        A = np.zeros((n, 3, 3))
        B = np.zeros((n, 3, 3))
        np.add.at(A, rows, c[:, None, None] * e_ref[:, :, None] * e_ref[:, None, :])
        np.add.at(B, rows, c[:, None, None] * e_def[:, :, None] * e_ref[:, None, :])

        eigenvalues = np.linalg.eigvalsh(A)
        planar = eigenvalues[:, 0] <= PLANAR_RATIO * eigenvalues[:, 2]
        if np.any(planar):
            degrees = topology.degrees
            ring_weight = np.bincount(rows, weights=c, minlength=n) / degrees
            ref_length = np.bincount(rows, weights=np.linalg.norm(e_ref, axis=1), minlength=n) / degrees
            def_length = np.bincount(rows, weights=np.linalg.norm(e_def, axis=1), minlength=n) / degrees
            n_ref = vertex_normals(reference)[planar] * ref_length[planar, None]
            n_def = vertex_normals(deformed)[planar] * def_length[planar, None]
            w = ring_weight[planar, None, None]
            A[planar] += w * n_ref[:, :, None] * n_ref[:, None, :]
            B[planar] += w * n_def[:, :, None] * n_ref[:, None, :]
            eigenvalues = np.linalg.eigvalsh(A)
        weak = eigenvalues[:, 0] <= RANK_RATIO * eigenvalues[:, 2]
        if np.any(weak):
            logger.warning("Regularizing %d rank-deficient neighborhoods", int(weak.sum()))
            trace = np.trace(A[weak], axis1=1, axis2=2)
            A[weak] += (TIKHONOV * trace / 3.0)[:, None, None] * np.eye(3)

        try:
            # D A = B with A symmetric
            D = np.linalg.solve(A, B.transpose(0, 2, 1)).transpose(0, 2, 1)
        except np.linalg.LinAlgError as exc:
            raise GeometryError(f"singular deformation gradient system: {exc}") from exc

        if not np.all(np.isfinite(D)):
            raise NonFiniteError("deformation gradients contain non-finite values")
        return DeformGradientField(D)

    @staticmethod
    def polar_decompose(matrices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        D = R S with det R = +1 and S symmetric; any reflection lands in S.

        Accepts a single 3×3 matrix or an N×3×3 stack.

        Raises:
            GeometryError: smallest singular value collapsed to zero
        """
        D = np.asarray(matrices, dtype=np.float64)
        single = D.ndim == 2
        if single:
            D = D[None]
        if not np.all(np.isfinite(D)):
            raise NonFiniteError("cannot decompose non-finite matrices")

        U, s, Vt = np.linalg.svd(D)
        collapsed = s[:, -1] <= COLLAPSE_RATIO * s[:, 0]
        if np.any(collapsed):
            raise GeometryError(
                f"degenerate deformation gradient at vertex {int(np.flatnonzero(collapsed)[0])}"
            )

        flip = np.linalg.det(U @ Vt) < 0
        U[flip, :, -1] *= -1.0
        s[flip, -1] *= -1.0

        R = U @ Vt
        S = (Vt.transpose(0, 2, 1) * s[:, None, :]) @ Vt
        S = 0.5 * (S + S.transpose(0, 2, 1))
        if single:
            return R[0], S[0]
        return R, S

    @staticmethod
    def consistent_axis_angle(
        rotations: np.ndarray,
        scales: np.ndarray,
        topology: Topology,
        previous: Optional[RotScaleField] = None,
    ) -> RotScaleField:
        """
        Choose each vertex's log-rotation branch by breadth-first traversal.

        Without `previous`, vertex 0 (and the first vertex of any further
        component) takes the principal branch and every newly reached vertex
        takes the branch nearest to the neighbor it was reached from.

        With `previous`, every vertex takes the branch nearest to its own
        previous-frame value.
        """
        n = len(rotations)
        principal = Rotation.from_matrix(rotations).as_rotvec()
        principal_angles = np.linalg.norm(principal, axis=1)
        seeds = previous.log_rotations if previous is not None else None
        if seeds is not None and seeds.shape != (n, 3):
            raise ShapeMismatchError(
                f"previous frame has {len(seeds)} vertices, expected {n}"
            )

        log = np.zeros((n, 3))
        assigned = np.zeros(n, dtype=bool)
        for seed in range(n):
            if assigned[seed]:
                continue
            target = seeds[seed] if seeds is not None else None
            log[seed] = _nearest_branch_(principal[seed], principal_angles[seed], target)
            assigned[seed] = True

            queue = deque([seed])
            while queue:
                i = queue.popleft()
                for j in topology.neighbors[i]:
                    if assigned[j]:
                        continue
                    target = seeds[j] if seeds is not None else log[i]
                    log[j] = _nearest_branch_(principal[j], principal_angles[j], target)
                    assigned[j] = True
                    queue.append(j)

        angles = np.linalg.norm(log, axis=1)
        axes = np.tile(DEFAULT_AXIS, (n, 1))
        moving = angles > 0
        axes[moving] = log[moving] / angles[moving, None]
        return RotScaleField(rotations=rotations, scales=scales, axes=axes, angles=angles)

    @staticmethod
    def assemble_feature(field: RotScaleField) -> FeatureFrame:
        S = field.scales
        features = np.column_stack(
            [
                field.log_rotations,
                S[:, 0, 0], S[:, 0, 1], S[:, 0, 2],
                S[:, 1, 1], S[:, 1, 2],
                S[:, 2, 2],
            ]
        )
        return FeatureFrame(features, normalized=False)

    @staticmethod
    def decode_feature(frame: FeatureFrame) -> DeformGradientField:
        """Rebuild D_i = exp([ωθ]×) S_i from an unnormalized feature frame."""
        if frame.normalized:
            raise NormalizationError("decode_feature needs an unnormalized frame")
        q = frame.features
        if not np.all(np.isfinite(q)):
            raise NonFiniteError("feature frame contains non-finite values")

        R = Rotation.from_rotvec(q[:, :3]).as_matrix()
        S = np.empty((len(q), 3, 3))
        S[:, 0, 0] = q[:, 3]
        S[:, 0, 1] = S[:, 1, 0] = q[:, 4]
        S[:, 0, 2] = S[:, 2, 0] = q[:, 5]
        S[:, 1, 1] = q[:, 6]
        S[:, 1, 2] = S[:, 2, 1] = q[:, 7]
        S[:, 2, 2] = q[:, 8]
        return DeformGradientField(R @ S)

    @staticmethod
    def encode(
        reference: Mesh,
        deformed: Mesh,
        topology: Topology,
        weights: CotanWeights,
        previous: Optional[RotScaleField] = None,
    ) -> tuple[FeatureFrame, RotScaleField]:
        """Full mesh → feature path; returns the rotation field for temporal seeding."""
        gradients = DeformationCodec.compute_deform_gradients(reference, deformed, topology, weights)
        R, S = DeformationCodec.polar_decompose(gradients.matrices)
        field = DeformationCodec.consistent_axis_angle(R, S, topology, previous)
        return DeformationCodec.assemble_feature(field), field

    @staticmethod
    def reconstruct_positions(
        field: DeformGradientField,
        reference: Mesh,
        topology: Topology,
        weights: CotanWeights,
        anchor_index: int = 0,
        anchor_position: Optional[np.ndarray] = None,
    ) -> Mesh:
        """
        Positions minimizing Σ_i Σ_j c_ij ‖(p_i − p_j) − D_i (p̄_i − p̄_j)‖²
        with p_anchor fixed.

        Normal equations: L p = b, L the cotangent Laplacian and
        b_i = ½ Σ_j c_ij (D_i + D_j)(p̄_i − p̄_j).

        Raises:
            ShapeMismatchError: field and reference sizes differ
            TopologyError: the weighted edge graph is disconnected
            ReconstructionError: relative residual above 1e-10
        """
        n = reference.vertex_count
        if field.vertex_count != n:
            raise ShapeMismatchError(
                f"gradient field has {field.vertex_count} vertices, reference has {n}"
            )
        if anchor_position is None:
            anchor_position = reference.vertices[anchor_index]
        anchor_position = np.asarray(anchor_position, dtype=np.float64)

        components, _ = connected_components(weights.matrix, directed=False)
        if components > 1:
            raise TopologyError(f"edge graph has {components} components, system is singular")

        D = field.matrices
        rows, cols, c = topology.rows, topology.cols, weights.values
        e_ref = reference.vertices[rows] - reference.vertices[cols]
        contrib = 0.5 * c[:, None] * np.einsum("mab,mb->ma", D[rows] + D[cols], e_ref)
        b = np.zeros((n, 3))
        np.add.at(b, rows, contrib)

        W = weights.matrix
        L = (sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()

        free = np.setdiff1d(np.arange(n), [anchor_index])
        L_free = L[free][:, free].tocsc()
        L_anchor = L[free][:, [anchor_index]]
        rhs = b[free] - L_anchor @ anchor_position[None, :]

        solve = factorized(L_free)
        solution = np.column_stack([solve(np.ascontiguousarray(rhs[:, k])) for k in range(3)])

        residual = np.linalg.norm(L_free @ solution - rhs)
        scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
        if not np.isfinite(residual) or residual / scale > RESIDUAL_TOLERANCE:
            raise ReconstructionError(f"relative residual {residual / scale:.3e} above tolerance")

        positions = np.empty((n, 3))
        positions[free] = solution
        positions[anchor_index] = anchor_position
        return reference.with_vertices(positions)
