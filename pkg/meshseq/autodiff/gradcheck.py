"""
Finite-difference gradient checks for the tape engine.
"""

import logging
from typing import Callable, Optional

import numpy as np

from .engine import Tape, Tensor, no_grad
from .params import ParamStore

logger = logging.getLogger(__name__)


def _relative_error_(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def grad_check(f: Callable[[Tensor], Tensor], x: np.ndarray, eps: float = 1e-5) -> float:
    """
    Max over coordinates of |a − n| / max(1e-8, |a| + |n|), comparing the
    tape gradient of scalar f at x with central differences.
    """
    leaf = Tensor(x, requires_grad=True)
    with Tape() as tape:
        loss = f(leaf)
        tape.backward(loss)
    analytic = leaf.grad.copy()

    worst = 0.0
    point = np.array(x, dtype=np.float64)
    with no_grad():
        for index in np.ndindex(point.shape):
            original = point[index]
            point[index] = original + eps
            upper = f(Tensor(point)).item()
            point[index] = original - eps
            lower = f(Tensor(point)).item()
            point[index] = original
            numeric = (upper - lower) / (2.0 * eps)
            worst = max(worst, _relative_error_(analytic[index], numeric))
    return worst


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    store: ParamStore,
    eps: float = 1e-5,
    samples_per_param: Optional[int] = None,
    seed: int = 0,
) -> dict[str, float]:
    """
    Per-parameter worst relative error of the tape gradient of loss_fn()
    against central differences. `samples_per_param` limits the number of
    coordinates sampled in each tensor.
    """
    store.zero_grad()
    with Tape() as tape:
        tape.backward(loss_fn())

    rng = np.random.default_rng(seed)
    report = {}
    with no_grad():
        for name, tensor in store.items():
            analytic = tensor.grad.copy()
            coordinates = list(np.ndindex(tensor.shape))
            if samples_per_param is not None and len(coordinates) > samples_per_param:
                picks = rng.choice(len(coordinates), size=samples_per_param, replace=False)
                coordinates = [coordinates[i] for i in sorted(picks)]

            worst = 0.0
            for index in coordinates:
                original = tensor.data[index]
                tensor.data[index] = original + eps
                upper = loss_fn().item()
                tensor.data[index] = original - eps
                lower = loss_fn().item()
                tensor.data[index] = original
                numeric = (upper - lower) / (2.0 * eps)
                worst = max(worst, _relative_error_(analytic[index], numeric))
            report[name] = worst
            logger.debug("grad check %s: %.3e", name, worst)
    store.zero_grad()
    return report
