"""Adam update over a ParamStore."""

import logging

import numpy as np

from ..autodiff.params import ParamStore
from ..errors import NonFiniteError

logger = logging.getLogger(__name__)


def adam_step(
    store: ParamStore,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """
    One bias-corrected Adam update from the accumulated gradients, which
    are cleared afterwards.

    Raises:
        NonFiniteError: some gradient is NaN or infinite (nothing is updated)
    """
    for name, tensor in store.items():
        if tensor.grad is not None and not np.all(np.isfinite(tensor.grad)):
            raise NonFiniteError(f"non-finite gradient for '{name}'")

    store.step += 1
    t = store.step
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    for name, tensor in store.items():
        if tensor.grad is None:
            continue
        g = tensor.grad
        store.m[name] = beta1 * store.m[name] + (1.0 - beta1) * g
        store.v[name] = beta2 * store.v[name] + (1.0 - beta2) * g * g
        m_hat = store.m[name] / correction1
        v_hat = store.v[name] / correction2
        tensor.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    store.zero_grad()
