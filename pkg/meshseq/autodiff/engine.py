"""
Reverse-Mode Differentiation Engine

A small tape-based autodiff over float64 numpy arrays, sized for the mesh
sequence network: a handful of tensor ops, each recording a closure that
maps the output gradient to its input gradients.

HOW IT WORKS:
------------
    with Tape() as tape:
        loss = ops.mean(ops.square(ops.matmul(x, w)))   # ops record nodes
        tape.backward(loss)                              # w.grad is filled

- Ops only record while a tape is active and at least one input requires
  gradients. Outside a tape (or inside `no_grad()`) they just compute.
- backward() walks the recorded nodes in reverse execution order, so
  accumulation order is fixed and results are deterministic.
- Leaf tensors created with requires_grad=True accumulate into `.grad`;
  intermediate gradients are dropped once consumed.
- The active tape is thread-local; independent tapes may run on separate
  threads as long as they touch disjoint parameter stores.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import GraphError

logger = logging.getLogger(__name__)

_local = threading.local()


class Tensor:
    """float64 array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "is_leaf", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.is_leaf = True
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    # Operator sugar; ops imports this module, so the import is deferred.
    def __add__(self, other):
        from . import ops
        return ops.add(self, _wrap_(other))

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, _wrap_(other))

    def __mul__(self, other):
        from . import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)


def _wrap_(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass
class Node:
    op: str
    inputs: tuple
    output: Tensor
    backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def _stack_() -> list:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def active_tape() -> Optional["Tape"]:
    stack = _stack_()
    return stack[-1] if stack else None


class Tape:
    """Records op nodes in execution order while active."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._outputs: set[int] = set()

    def __enter__(self) -> "Tape":
        _stack_().append(self)
        return self

    def __exit__(self, *exc_info):
        _stack_().pop()
        return False

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, inputs: tuple, output: Tensor, backward_fn) -> None:
        self.nodes.append(Node(op, inputs, output, backward_fn))
        self._outputs.add(id(output))

    def backward(self, loss: Tensor) -> None:
        """
        Accumulate d(loss)/d(leaf) into every reachable leaf's `.grad`.

        The tape is consumed: its nodes are released afterwards.

        Raises:
            GraphError: loss is not a scalar, or was not produced on this tape
        """
        if loss.size != 1:
            raise GraphError(f"loss must be a scalar, got shape {loss.shape}")
        if id(loss) not in self._outputs:
            raise GraphError("loss was not produced on this tape")

        grads = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            upstream = grads.pop(id(node.output), None)
            if upstream is None:
                continue
            for tensor, grad in zip(node.inputs, node.backward_fn(upstream)):
                if grad is None or not tensor.requires_grad:
                    continue
                if tensor.is_leaf:
                    if tensor.grad is None:
                        tensor.grad = np.zeros_like(tensor.data)
                    tensor.grad += grad
                else:
                    key = id(tensor)
                    grads[key] = grads[key] + grad if key in grads else grad

        logger.debug("Backward pass over %d nodes", len(self.nodes))
        self.nodes.clear()
        self._outputs.clear()


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


class no_grad:
    """Suspend recording (inference, finite differences)."""

    def __enter__(self):
        _stack_().append(None)
        return self

    def __exit__(self, *exc_info):
        _stack_().pop()
        return False


def record_op(op: str, inputs: tuple, data: np.ndarray, backward_fn) -> Tensor:
    """Wrap an op result, recording it on the active tape when it needs gradients."""
    output = Tensor(data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        output.requires_grad = True
        output.is_leaf = False
        tape.record(op, inputs, output, backward_fn)
    return output
