"""
Tests for Generation and Completion

Covers:
- Conditional generation
- Bidirectional, optimized and linear completion
- Multi-keyframe joining
- CMA-ES minimization
"""
import pytest
import numpy as np

from meshseq.autodiff.engine import no_grad
from meshseq.errors import DatasetError, NormalizationError
from meshseq.geometry.context import CodecContext
from meshseq.geometry.mesh import build_topology
from meshseq.geometry.normalization import fit_normalization
from meshseq.network import rollout
from meshseq.sequence.completion import (
    CMAConfig,
    CompletionRequest,
    baseline_linear,
    complete,
    complete_keyframes,
    complete_meshes,
    minimize_cma,
)
from meshseq.sequence.generation import generate_conditional, generate_features
from meshseq.sequence.synthetic import deform, tube_mesh


@pytest.fixture
def ico_topology(icosahedron):
    return build_topology(icosahedron)


class TestGeneration:
    """Tests for generate_features / generate_conditional."""

    def test_frame_count(self, tiny_model, ico_topology, feature_frames):
        frames = generate_features(tiny_model, feature_frames[:2], 5, ico_topology)
        assert len(frames) == 5
        assert all(f.shape == (12, 9) for f in frames)

    def test_zero_frames(self, tiny_model, ico_topology, feature_frames):
        assert generate_features(tiny_model, feature_frames[:1], 0, ico_topology) == []

    def test_meshes_keep_anchor(self, tiny_model, ico_context):
        """Generated meshes pin vertex 0 where the last initial frame had it."""
        moved = ico_context.reference.with_vertices(1.2 * ico_context.reference.vertices + [1.0, 0.0, 0.0])
        frames = ico_context.encode_sequence([ico_context.reference, moved], normalize=False)
        context = ico_context.with_normalization(fit_normalization(frames, "channel"))

        meshes = generate_conditional(tiny_model, [moved], 3, context)

        assert len(meshes) == 3
        for mesh in meshes:
            assert np.allclose(mesh.vertices[0], moved.vertices[0])

    def test_needs_initial_frames(self, tiny_model, ico_context):
        with pytest.raises(DatasetError):
            generate_conditional(tiny_model, [], 3, ico_context)


class TestCompletionRequest:
    """Tests for request validation."""

    def test_short_segment(self, feature_frames):
        with pytest.raises(DatasetError):
            CompletionRequest(feature_frames[0], feature_frames[1], length=1)

    def test_unknown_strategy(self, feature_frames):
        with pytest.raises(DatasetError):
            CompletionRequest(feature_frames[0], feature_frames[1], length=4, strategy="magic")


class TestBidirectional:
    """Tests for complete_bidirectional."""

    def test_endpoints_pinned(self, tiny_model, ico_topology, feature_frames):
        request = CompletionRequest(feature_frames[0], feature_frames[1], length=6)
        result = complete(tiny_model, request, ico_topology)

        assert len(result.features) == 6
        assert np.array_equal(result.features[0], feature_frames[0])
        assert np.array_equal(result.features[-1], feature_frames[1])
        assert 1 <= result.stitch_index <= 6

    def test_two_frames_are_the_keyframes(self, tiny_model, ico_topology, feature_frames):
        request = CompletionRequest(feature_frames[0], feature_frames[1], length=2)
        result = complete(tiny_model, request, ico_topology)

        assert len(result.features) == 2
        assert np.array_equal(result.features[1], feature_frames[1])

    def test_diversity_seed(self, tiny_model, ico_topology, feature_frames):
        """Seeds change the interior; the same seed repeats it."""
        def interior(seed, blend=0):
            request = CompletionRequest(
                feature_frames[0], feature_frames[1], length=6, diversity_seed=seed, blend_width=blend
            )
            return np.stack(complete(tiny_model, request, ico_topology).features[1:-1])

        assert np.array_equal(interior(1), interior(1))
        assert not np.allclose(interior(1), interior(2))
        assert interior(1, blend=2).shape == (4, 12, 9)


class TestOptimized:
    """Tests for complete_optimized and minimize_cma."""

    def test_never_worse_than_start(self, tiny_model, ico_topology, feature_frames):
        start, end = feature_frames[0], feature_frames[1]
        with no_grad():
            landing = rollout([start], 4, tiny_model.initial_state(0.1), tiny_model, ico_topology)[-1]
        baseline = float(np.mean((landing.data - end) ** 2))

        request = CompletionRequest(start, end, length=5, strategy="optimized")
        settings = CMAConfig(population=6, sigma0=0.1, generations=4, seed=0)
        result = complete(tiny_model, request, ico_topology, settings)

        assert len(result.features) == 5
        assert result.objective <= baseline
        assert np.array_equal(result.features[-1], end)

    def test_sphere_at_completion_budget(self):
        """The default 200 generations solve a 10-D sphere."""
        x, value = minimize_cma(
            lambda v: float(np.sum(v * v)), np.full(10, 0.5),
            sigma0=0.3, population=16, generations=CMAConfig().generations, seed=0,
        )
        assert value < 1e-3
        assert np.sum(x * x) == pytest.approx(value)

    def test_sphere_128d_needs_extended_budget(self):
        """128-D from 0.5·1 reaches 1e-3 only with 2500 generations, not the default 200."""
        x, value = minimize_cma(
            lambda v: float(np.sum(v * v)), np.full(128, 0.5),
            sigma0=0.3, population=16, generations=2500, seed=0,
        )
        assert value < 1e-3
        assert np.sum(x * x) == pytest.approx(value)

    def test_seeded(self):
        def run():
            return minimize_cma(lambda v: float(np.sum((v - 1.0) ** 2)), np.zeros(4), 0.5, 8, 20, seed=3)

        assert np.array_equal(run()[0], run()[0])


class TestLinear:
    """Tests for the linear baseline."""

    def test_extrapolate(self):
        frames = baseline_linear(np.zeros((2, 9)), np.ones((2, 9)), 3, "extrapolate")
        assert [f[0, 0] for f in frames] == [2.0, 3.0, 4.0]

    def test_interpolate(self):
        frames = baseline_linear(np.zeros((2, 9)), np.ones((2, 9)), 5, "interpolate")
        assert [f[0, 0] for f in frames] == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_no_model_needed(self, ico_topology, feature_frames):
        request = CompletionRequest(feature_frames[0], feature_frames[1], 4, strategy="baseline-linear")
        assert len(complete(None, request, ico_topology).features) == 4

    def test_model_strategies_need_model(self, ico_topology, feature_frames):
        request = CompletionRequest(feature_frames[0], feature_frames[1], 4)
        with pytest.raises(DatasetError):
            complete(None, request, ico_topology)


class TestKeyframes:
    """Tests for multi-keyframe completion."""

    def test_segments_share_keyframes(self, ico_topology, feature_frames):
        keys = feature_frames[:3]
        frames = complete_keyframes(None, keys, [4, 3], ico_topology, strategy="baseline-linear")

        assert len(frames) == 6
        assert np.array_equal(frames[0], keys[0])
        assert np.array_equal(frames[3], keys[1])
        assert np.array_equal(frames[5], keys[2])

    def test_segment_count_checked(self, ico_topology, feature_frames):
        with pytest.raises(DatasetError):
            complete_keyframes(None, feature_frames[:3], [4], ico_topology, strategy="baseline-linear")

    def test_model_strategy_needs_normalization(self, ico_context, tiny_model):
        keys = [ico_context.reference, ico_context.reference]
        with pytest.raises(NormalizationError):
            complete_meshes(tiny_model, keys, [4], ico_context, strategy="bidirectional")

    def test_meshes_pass_keyframes_through(self):
        rest = tube_mesh("swing-cylinder", rings=6, segments=8)
        keys = [deform("swing-cylinder", rest, angle) for angle in (0.0, 0.3, 0.6)]
        context = CodecContext.from_reference(rest)

        meshes = complete_meshes(None, keys, [3, 4], context, strategy="baseline-linear")

        assert len(meshes) == 6
        assert meshes[0] is keys[0]
        assert meshes[2] is keys[1]
        assert meshes[5] is keys[2]
        assert all(m.same_connectivity(rest) for m in meshes)
