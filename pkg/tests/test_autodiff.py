"""
Tests for the Differentiation Engine

Covers:
- Op gradients against finite differences
- Neighbor averaging against the dense operator
- Tape rules (scalar loss, consumption, no_grad)
- Gradient accumulation on leaves
- Parameter store
"""
import pytest
import numpy as np

from meshseq.autodiff import ops
from meshseq.autodiff.engine import Tape, Tensor, backward, no_grad
from meshseq.autodiff.gradcheck import grad_check
from meshseq.autodiff.params import ParamStore
from meshseq.errors import GraphError, ShapeMismatchError
from meshseq.geometry.mesh import build_topology

RNG = np.random.default_rng(21)
W = Tensor(RNG.normal(size=(3, 4)))
C = Tensor(RNG.normal(size=(5, 4)))


def weighted(y):
    """Scalar with generic, non-vanishing gradients."""
    return ops.sum(ops.mul(y, C))


class TestOpGradients:
    """Finite-difference checks for each op."""

    @pytest.mark.parametrize(
        "f",
        [
            lambda x: weighted(ops.tanh(ops.matmul(x, W))),
            lambda x: weighted(ops.sigmoid(ops.matmul(x, W))),
            lambda x: weighted(ops.exp(ops.scale(ops.matmul(x, W), 0.3))),
            lambda x: weighted(ops.square(ops.matmul(x, W))),
            lambda x: ops.mean(ops.square(ops.sub(ops.matmul(x, W), C))),
            lambda x: weighted(ops.add_bias(ops.tanh(ops.matmul(x, W)), Tensor([0.1, 0.2, 0.3, 0.4]))),
            lambda x: weighted(ops.transpose(ops.transpose(ops.tanh(ops.matmul(x, W))))),
            lambda x: weighted(ops.reshape(ops.reshape(ops.tanh(ops.matmul(x, W)), (4, 5)), (5, 4))),
        ],
        ids=["tanh", "sigmoid", "exp", "square", "mse", "add_bias", "transpose", "reshape"],
    )
    def test_op(self, f):
        x = RNG.normal(size=(5, 3))
        assert grad_check(f, x) < 1e-6

    def test_concat_and_slice(self):
        def f(x):
            joined = ops.concat([ops.tanh(x), ops.square(x)], axis=1)
            return ops.sum(ops.mul(ops.slice(joined, (slice(None), slice(1, 5))), C))

        assert grad_check(f, RNG.normal(size=(5, 3))) < 1e-6

    def test_neighbor_mean_gather(self, icosahedron):
        topology = build_topology(icosahedron)
        weights = Tensor(RNG.normal(size=(12, 2)))

        def f(x):
            return ops.sum(ops.mul(ops.tanh(ops.neighbor_mean_gather(x, topology)), weights))

        assert grad_check(f, RNG.normal(size=(12, 2))) < 1e-6

    def test_scalar_broadcast(self):
        """A size-1 operand broadcasts and receives the summed gradient."""
        a = Tensor(2.0, requires_grad=True)
        x = Tensor(np.arange(4.0).reshape(2, 2))
        with Tape() as tape:
            tape.backward(ops.sum(ops.mul(x, a)))
        assert float(a.grad) == pytest.approx(6.0)


class TestNeighborMean:
    """neighbor_mean_gather against the dense 1-ring average."""

    def test_matches_dense_operator(self, random_graph_mesh, dense_adjacency):
        rng = np.random.default_rng(8)
        for _ in range(20):
            mesh = random_graph_mesh(rng)
            topology = build_topology(mesh)
            x = rng.normal(size=(mesh.vertex_count, 4))

            adjacency = dense_adjacency(mesh)
            dense = adjacency / adjacency.sum(axis=1, keepdims=True)
            got = ops.neighbor_mean_gather(Tensor(x), topology).data

            assert np.allclose(topology.mean_operator.toarray(), dense, rtol=0, atol=1e-15)
            assert np.allclose(got, topology.mean_operator.toarray() @ x, rtol=0, atol=1e-12)


class TestTape:
    """Tests for the tape rules."""

    def test_non_scalar_loss(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with Tape() as tape:
            y = ops.tanh(x)
            with pytest.raises(GraphError):
                tape.backward(y)

    def test_loss_from_another_tape(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with Tape():
            loss = ops.sum(x)
        with Tape() as other:
            with pytest.raises(GraphError):
                other.backward(loss)

    def test_tape_is_consumed(self):
        """A second backward over the same tape is an error."""
        x = Tensor(np.ones(3), requires_grad=True)
        with Tape() as tape:
            loss = ops.sum(ops.square(x))
            backward(tape, loss)
            assert len(tape) == 0
            with pytest.raises(GraphError):
                tape.backward(loss)

    def test_no_grad_records_nothing(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with Tape() as tape:
            with no_grad():
                ops.sum(ops.square(x))
            assert len(tape) == 0

    def test_leaf_gradients_accumulate(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        for _ in range(2):
            with Tape() as tape:
                tape.backward(ops.sum(ops.square(x)))
        assert np.allclose(x.grad, [4.0, 8.0])

    def test_operator_sugar(self):
        x = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
        with Tape() as tape:
            y = (x * 3.0 - x) @ Tensor(np.ones((2, 1)))
            tape.backward(ops.sum(-y))
        assert np.allclose(x.grad, [[-2.0, -2.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            ops.add(Tensor(np.ones((2, 2))), Tensor(np.ones((3, 2))))
        with pytest.raises(ShapeMismatchError):
            ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_unknown_op(self):
        with pytest.raises(GraphError):
            ops.forward_op("conv3d", [Tensor(1.0)])

    def test_forward_op_dispatch(self):
        a, b = Tensor(np.ones((2, 2))), Tensor(np.full((2, 2), 2.0))
        assert np.allclose(ops.forward_op("add", [a, b]).data, 3.0)
        assert ops.forward_op("concat", [a, b], 1).shape == (2, 4)


class TestParamStore:
    """Tests for ParamStore."""

    def test_counts_and_decay(self):
        store = ParamStore()
        store.add("layer.W", np.zeros((3, 4)))
        store.add("layer.b", np.zeros(4), decay=False)

        assert len(store) == 2
        assert store.num_parameters() == 16
        assert store.num_parameters(prefix="layer.b") == 4
        assert [t.name for t in store.weights()] == ["layer.W"]

    def test_assign_checks_shape(self):
        store = ParamStore()
        store.add("W", np.zeros((2, 2)))
        store.assign("W", np.ones((2, 2)))

        assert np.allclose(store["W"].data, 1.0)
        with pytest.raises(ShapeMismatchError):
            store.assign("W", np.ones(3))

    def test_clone_is_independent(self):
        store = ParamStore()
        store.add("W", np.zeros(2))
        copy = store.clone()
        copy.assign("W", np.ones(2))

        assert np.allclose(store["W"].data, 0.0)
