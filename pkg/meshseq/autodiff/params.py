"""
Parameter store: named trainable tensors plus their Adam moments.
"""

import copy
from typing import Iterator, Optional

import numpy as np

from ..errors import ShapeMismatchError
from .engine import Tensor


class ParamStore:
    """
    Ordered mapping name → trainable Tensor.

    `decay` marks weights that enter the L2 penalty (biases do not).
    Moments `m`/`v` and `step` belong to the Adam optimizer and travel with
    the store through checkpoints.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._decay: dict[str, bool] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value: np.ndarray, decay: bool = True) -> Tensor:
        tensor = Tensor(value, requires_grad=True, name=name)
        self._params[name] = tensor
        self._decay[name] = decay
        self.m[name] = np.zeros_like(tensor.data)
        self.v[name] = np.zeros_like(tensor.data)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def decays(self, name: str) -> bool:
        return self._decay[name]

    def weights(self) -> list[Tensor]:
        """Tensors subject to weight decay."""
        return [t for name, t in self._params.items() if self._decay[name]]

    def num_parameters(self, prefix: Optional[str] = None) -> int:
        return int(
            np.sum(
                [t.size for name, t in self._params.items() if prefix is None or name.startswith(prefix)],
                dtype=np.int64,
            )
        )

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.zero_grad()

    def assign(self, name: str, value: np.ndarray) -> None:
        """Overwrite a parameter in place, keeping its shape."""
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._params[name].shape:
            raise ShapeMismatchError(
                f"{name}: expected shape {self._params[name].shape}, got {value.shape}"
            )
        self._params[name].data[...] = value

    def clone(self) -> "ParamStore":
        """Independent deep copy (parameters, gradients, moments, step)."""
        return copy.deepcopy(self)
