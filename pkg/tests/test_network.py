"""
Tests for the Generator Network

Covers:
- Parameter layout (shared decoder weights, no decoder conv parameters)
- Chain state packing
- Single steps and rollouts
- Latent sampling
- Mesh convolution and LSTM step against closed forms
- Opposite-state chain symmetry
- End-to-end parameter gradients
"""
import pytest
import numpy as np

from meshseq.autodiff.engine import Tensor, no_grad
from meshseq.autodiff.gradcheck import grad_check_params
from meshseq.errors import ConfigError, DatasetError, ShapeMismatchError
from meshseq.geometry.mesh import build_topology
from meshseq.network import ChainState, GeneratorModel, ModelConfig, generator_step, rollout
from meshseq.network.generator import encode_latent, lstm_step, mesh_conv_forward
from meshseq.network.model import MeshConvLayer, parameter_shapes
from meshseq.training.losses import LossWeights, compute_loss
from meshseq.training.trainer import bidirectional_rollout


@pytest.fixture
def ico_topology(icosahedron):
    return build_topology(icosahedron)


class TestModelLayout:
    """Tests for GeneratorModel parameters."""

    def test_parameter_count(self, tiny_model, tiny_config):
        expected = sum(int(np.prod(shape)) for shape in parameter_shapes(tiny_config).values())
        assert tiny_model.store.num_parameters() == expected

    def test_decoder_shares_encoder_weights(self, tiny_model):
        """Transposed decoder convs reuse the encoder tensors and own nothing."""
        decoder = tiny_model.decoder_layers
        encoder = tiny_model.encoder_layers

        assert tiny_model.decoder_conv_parameter_count() == 0
        assert decoder[-1].W1 is encoder[0].W1
        assert decoder[0].W2 is encoder[-1].W2
        assert all(layer.b is None for layer in decoder)
        assert decoder[-1].out_features == 9
        assert decoder[-1].activation == "identity"

    def test_forget_gate_bias(self, tiny_model, tiny_config):
        H = tiny_config.lstm_hidden
        bias = tiny_model.store["lstm0.b"].data
        assert np.allclose(bias[H : 2 * H], 1.0)
        assert np.allclose(bias[:H], 0.0)

    def test_seeded_initialization(self, tiny_config):
        a = GeneratorModel(tiny_config, seed=1)
        b = GeneratorModel(tiny_config, seed=1)
        assert np.array_equal(a.store["latent.mu.W"].data, b.store["latent.mu.W"].data)

    def test_invalid_channels(self):
        with pytest.raises(ConfigError):
            ModelConfig(vertex_count=4, conv_channels=(3, 8))


class TestChainState:
    """Tests for ChainState."""

    def test_vector_round_trip(self, tiny_config):
        vector = np.arange(2 * tiny_config.lstm_layers * tiny_config.lstm_hidden, dtype=float)
        state = ChainState.from_vector(tiny_config, vector)

        assert np.array_equal(state.to_vector(), vector)
        assert np.array_equal(state.hidden[1].data.ravel(), vector[12:18])

    def test_negated(self, tiny_model):
        state = tiny_model.initial_state(0.1).negated()
        assert np.allclose(state.to_vector(), -0.1)

    def test_wrong_vector_length(self, tiny_config):
        with pytest.raises(ShapeMismatchError):
            ChainState.from_vector(tiny_config, np.zeros(5))


class TestForward:
    """Tests for generator_step and rollout."""

    def test_step_shapes(self, tiny_model, ico_topology, feature_frames):
        state, x = generator_step(tiny_model.initial_state(0.1), feature_frames[0], tiny_model, ico_topology)

        assert x.shape == (12, 9)
        assert len(state.hidden) == 2
        assert state.hidden[0].shape == (1, 6)

    def test_frame_shape_checked(self, tiny_model, ico_topology):
        with pytest.raises(ShapeMismatchError):
            encode_latent(np.zeros((11, 9)), tiny_model, ico_topology)

    def test_rollout_warm_up(self, tiny_model, ico_topology, feature_frames):
        """Initial frames before the last only advance the state."""
        a, b = feature_frames[:2]
        with no_grad():
            frames = rollout([a, b], 3, tiny_model.initial_state(0.1), tiny_model, ico_topology)
            state, _ = generator_step(tiny_model.initial_state(0.1), a, tiny_model, ico_topology)
            manual = rollout([b], 3, state, tiny_model, ico_topology)

        assert len(frames) == 3
        for got, want in zip(frames, manual):
            assert np.array_equal(got.data, want.data)

    def test_rollout_needs_frames(self, tiny_model, ico_topology):
        with pytest.raises(DatasetError):
            rollout([], 2, tiny_model.initial_state(0.1), tiny_model, ico_topology)

    def test_sampling_is_seeded(self, tiny_model, ico_topology, feature_frames):
        def run(seed):
            rng = np.random.default_rng(seed)
            with no_grad():
                return rollout(
                    [feature_frames[0]], 2, tiny_model.initial_state(0.1), tiny_model,
                    ico_topology, sample=True, rng=rng,
                )[-1].data

        assert np.array_equal(run(5), run(5))
        assert not np.allclose(run(5), run(6))

    def test_mean_latent_without_sampling(self, tiny_model, ico_topology, feature_frames):
        z, mu, _ = encode_latent(feature_frames[0], tiny_model, ico_topology)
        assert z is mu
        assert mu.shape == (1, 5)


def _sigmoid_(x):
    return 1.0 / (1.0 + np.exp(-x))


class TestMeshConv:
    """mesh_conv_forward against y = act(X W1ᵀ + D⁻¹A X W2ᵀ + b) built densely."""

    @pytest.mark.parametrize("activation", ["tanh", "identity"])
    def test_matches_dense_operator(self, random_graph_mesh, dense_adjacency, activation):
        rng = np.random.default_rng(13)
        for _ in range(100):
            mesh = random_graph_mesh(rng)
            topology = build_topology(mesh)
            adjacency = dense_adjacency(mesh)
            mean = adjacency / adjacency.sum(axis=1, keepdims=True)

            c_in, c_out = rng.integers(1, 6, size=2)
            W1, W2 = rng.normal(size=(c_out, c_in)), rng.normal(size=(c_out, c_in))
            b = rng.normal(size=c_out)
            x = rng.normal(size=(mesh.vertex_count, c_in))

            layer = MeshConvLayer(Tensor(W1), Tensor(W2), Tensor(b), activation=activation)
            linear = x @ W1.T + mean @ x @ W2.T + b
            expected = np.tanh(linear) if activation == "tanh" else linear

            got = mesh_conv_forward(Tensor(x), layer, topology).data
            assert np.allclose(got, expected, rtol=0, atol=1e-12)

    def test_transposed_layer(self, random_graph_mesh, dense_adjacency):
        rng = np.random.default_rng(14)
        mesh = random_graph_mesh(rng)
        topology = build_topology(mesh)
        adjacency = dense_adjacency(mesh)
        mean = adjacency / adjacency.sum(axis=1, keepdims=True)
        W1, W2 = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
        x = rng.normal(size=(mesh.vertex_count, 4))

        layer = MeshConvLayer(Tensor(W1), Tensor(W2), None, activation="identity", transposed=True)

        got = mesh_conv_forward(Tensor(x), layer, topology).data
        assert np.allclose(got, x @ W1 + mean @ x @ W2, rtol=0, atol=1e-12)


class TestLSTMStep:
    """lstm_step against closed forms."""

    def test_zero_weights(self, tiny_model, tiny_config):
        """All gates sit at 0.5 and the candidate at 0: c' = c/2, h' = tanh(c/2)/2, ẑ = output bias."""
        store = tiny_model.store
        for name, tensor in store.items():
            if name.startswith("lstm") or name == "output.W":
                store.assign(name, np.zeros(tensor.shape))
        bias = np.arange(tiny_config.latent_dim, dtype=float)
        store.assign("output.b", bias)

        z = Tensor(np.random.default_rng(0).normal(size=(1, tiny_config.latent_dim)))
        z_hat, state = lstm_step(z, tiny_model.initial_state(0.3), tiny_model)

        assert np.array_equal(z_hat.data, bias[None, :])
        for h, c in zip(state.hidden, state.cell):
            assert np.allclose(c.data, 0.15)
            assert np.allclose(h.data, 0.5 * np.tanh(0.15))

    def test_hand_traced_step(self):
        """One layer, one hidden unit, two latent channels."""
        model = GeneratorModel(
            ModelConfig(vertex_count=12, conv_channels=(9, 2), latent_dim=2, lstm_layers=1, lstm_hidden=1)
        )
        store = model.store
        # gate rows in order i, f, g, o
        store.assign("lstm0.Wx", [[0.5, -1.0], [0.2, 0.1], [1.0, 1.0], [-0.3, 0.4]])
        store.assign("lstm0.Wh", [[0.1], [-0.2], [0.3], [0.5]])
        store.assign("lstm0.b", [0.0, 1.0, -0.5, 0.2])
        store.assign("output.W", [[2.0], [-1.0]])
        store.assign("output.b", [0.1, 0.2])

        z = Tensor([[1.0, 0.5]])
        state = ChainState(hidden=[Tensor([[0.4]])], cell=[Tensor([[-0.2]])])

        z_hat, next_state = lstm_step(z, state, model)

        i = _sigmoid_(0.5 * 1.0 - 1.0 * 0.5 + 0.1 * 0.4 + 0.0)
        f = _sigmoid_(0.2 * 1.0 + 0.1 * 0.5 - 0.2 * 0.4 + 1.0)
        g = np.tanh(1.0 * 1.0 + 1.0 * 0.5 + 0.3 * 0.4 - 0.5)
        o = _sigmoid_(-0.3 * 1.0 + 0.4 * 0.5 + 0.5 * 0.4 + 0.2)
        c = f * -0.2 + i * g
        h = o * np.tanh(c)

        assert next_state.cell[0].data[0, 0] == pytest.approx(c, abs=1e-14)
        assert next_state.hidden[0].data[0, 0] == pytest.approx(h, abs=1e-14)
        assert np.allclose(z_hat.data, [[2.0 * h + 0.1, -h + 0.2]], rtol=0, atol=1e-14)


class TestBidirectionalContract:
    """The two chains differ only in start frame and state sign."""

    def test_swapping_start_and_state_swaps_chains(
        self, tiny_model, tiny_config, ico_topology, feature_frames
    ):
        a, b = feature_frames[0], feature_frames[3]
        size = 2 * tiny_config.lstm_layers * tiny_config.lstm_hidden
        vector = np.random.default_rng(4).uniform(-0.5, 0.5, size=size)
        state = ChainState.from_vector(tiny_config, vector)

        with no_grad():
            forward, backward = bidirectional_rollout(a, b, 4, tiny_model, ico_topology, forward_state=state)
            swapped_forward, swapped_backward = bidirectional_rollout(
                b, a, 4, tiny_model, ico_topology, forward_state=state.negated()
            )

        for got, want in zip(swapped_forward, backward):
            assert np.array_equal(got.data, want.data)
        for got, want in zip(swapped_backward, forward):
            assert np.array_equal(got.data, want.data)


class TestGradients:
    """End-to-end finite-difference check of the training loss."""

    def test_bidirectional_loss_gradients(self, tiny_model, ico_topology, feature_frames):
        truth = feature_frames[:4]
        weights = LossWeights(bidirection=0.5, regularization=0.1)

        def loss():
            trace = []
            forward, backward = bidirectional_rollout(
                truth[0], truth[-1], 4, tiny_model, ico_topology, 0.1, trace=trace
            )
            return compute_loss(forward, backward, truth, trace, tiny_model, weights).graph

        report = grad_check_params(loss, tiny_model.store, samples_per_param=4, seed=2)

        assert set(report) == set(tiny_model.store)
        assert max(report.values()) < 1e-4
