"""
Differentiable tensor ops.

Each op computes its result eagerly and hands record_op a closure from the
output gradient to the input gradients. Broadcasting is limited to a
size-1 operand (scalar-tensor) and add_bias (row vector added to every row).
"""

from typing import Sequence

import numpy as np

from ..errors import GraphError, ShapeMismatchError
from .engine import Tensor, record_op


def _reduce_(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.full(shape, grad.sum())


def _check_pair_(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeMismatchError(f"{op}: shapes {a.shape} and {b.shape} do not match")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return record_op(
        "matmul", (a, b), a.data @ b.data,
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ShapeMismatchError(f"transpose expects a matrix, got {x.shape}")
    return record_op("transpose", (x,), x.data.T, lambda g: (g.T,))


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_pair_("add", a, b)
    return record_op(
        "add", (a, b), a.data + b.data,
        lambda g: (_reduce_(g, a.shape), _reduce_(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_pair_("sub", a, b)
    return record_op(
        "sub", (a, b), a.data - b.data,
        lambda g: (_reduce_(g, a.shape), _reduce_(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_pair_("mul", a, b)
    return record_op(
        "mul", (a, b), a.data * b.data,
        lambda g: (_reduce_(g * b.data, a.shape), _reduce_(g * a.data, b.shape)),
    )


def scale(x: Tensor, factor: float) -> Tensor:
    return record_op("scale", (x,), x.data * factor, lambda g: (g * factor,))


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """x (rows × C) plus bias (C,) on every row."""
    if x.data.ndim != 2 or bias.shape != (x.shape[1],):
        raise ShapeMismatchError(f"add_bias: bias {bias.shape} does not fit {x.shape}")
    return record_op(
        "add_bias", (x, bias), x.data + bias.data,
        lambda g: (g, g.sum(axis=0)),
    )


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return record_op("tanh", (x,), out, lambda g: (g * (1.0 - out * out),))


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return record_op("sigmoid", (x,), out, lambda g: (g * out * (1.0 - out),))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return record_op("exp", (x,), out, lambda g: (g * out,))


def square(x: Tensor) -> Tensor:
    return record_op("square", (x,), x.data * x.data, lambda g: (2.0 * g * x.data,))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise ShapeMismatchError("concat needs at least one tensor")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatchError(f"concat: {exc}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return record_op(
        "concat", tensors, data,
        lambda g: tuple(np.split(g, bounds, axis=axis)),
    )


def slice(x: Tensor, index) -> Tensor:
    """Basic (non-fancy) indexing, e.g. slice(x, (slice(None), slice(0, 4)))."""
    data = x.data[index].copy()

    def backward_fn(g):
        grad = np.zeros_like(x.data)
        grad[index] = g
        return (grad,)

    return record_op("slice", (x,), data, backward_fn)


def reshape(x: Tensor, shape: tuple) -> Tensor:
    try:
        data = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatchError(f"reshape: {exc}") from exc
    return record_op("reshape", (x,), data, lambda g: (g.reshape(x.shape),))


def sum(x: Tensor) -> Tensor:
    return record_op("sum", (x,), np.array(x.data.sum()), lambda g: (np.full(x.shape, g),))


def mean(x: Tensor) -> Tensor:
    n = x.size
    return record_op(
        "mean", (x,), np.array(x.data.mean()), lambda g: (np.full(x.shape, g / n),)
    )


def neighbor_mean_gather(x: Tensor, topology) -> Tensor:
    """Row i becomes the mean of x over the 1-ring of vertex i."""
    operator = topology.mean_operator
    if np.any(np.diff(operator.indptr) == 0):
        raise GraphError("neighbor_mean_gather: a vertex has an empty neighbor list")
    if x.data.ndim != 2 or x.shape[0] != operator.shape[0]:
        raise ShapeMismatchError(
            f"neighbor_mean_gather: {x.shape} does not match {operator.shape[0]} vertices"
        )
    transposed = operator.T.tocsr()
    return record_op(
        "neighbor_mean_gather", (x,), operator @ x.data,
        lambda g: (transposed @ g,),
    )


OPS = {
    "matmul": matmul,
    "transpose": transpose,
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "add_bias": add_bias,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "exp": exp,
    "square": square,
    "concat": concat,
    "slice": slice,
    "reshape": reshape,
    "sum": sum,
    "mean": mean,
    "neighbor_mean_gather": neighbor_mean_gather,
}


def forward_op(op: str, inputs: Sequence[Tensor], *aux) -> Tensor:
    """Dispatch by op name; aux carries non-tensor arguments (axis, index, factor, topology)."""
    if op not in OPS:
        raise GraphError(f"unknown op '{op}'")
    if op == "concat":
        return concat(inputs, *aux)
    return OPS[op](*inputs, *aux)
