"""
Training objective.

    total = L_reconstruct + α1·L_bidirection + α2·(L_KL + L_2)

L_reconstruct compares both chains with ground truth, L_bidirection
compares the forward chain with the reversed backward chain, L_KL is the
mean per-step KL divergence of the latent posterior from N(0, I), and L_2
is the mean squared value of all non-bias weights. Every norm is a mean
squared error.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..autodiff import ops
from ..autodiff.engine import Tensor
from ..errors import ShapeMismatchError
from ..network.generator import LatentRecord, as_tensor
from ..network.model import GeneratorModel

LOG_COLUMNS = ("iteration", "total", "rec", "bd", "kl", "l2")


@dataclass(frozen=True)
class LossWeights:
    bidirection: float = 0.5
    regularization: float = 0.1
    use_kl: bool = True
    use_l2: bool = True


@dataclass
class LossReport:
    total: float
    reconstruct: float
    bidirection: float
    kl: float
    l2: float
    graph: Optional[Tensor] = field(default=None, repr=False, compare=False)

    def as_row(self, iteration: int) -> list:
        return [iteration, self.total, self.reconstruct, self.bidirection, self.kl, self.l2]

    @classmethod
    def average(cls, reports: Sequence["LossReport"]) -> "LossReport":
        count = len(reports)
        graph = ops.scale(_sum_([r.graph for r in reports]), 1.0 / count)
        return cls(
            total=float(np.mean([r.total for r in reports])),
            reconstruct=float(np.mean([r.reconstruct for r in reports])),
            bidirection=float(np.mean([r.bidirection for r in reports])),
            kl=float(np.mean([r.kl for r in reports])),
            l2=float(np.mean([r.l2 for r in reports])),
            graph=graph,
        )


def _sum_(terms: Sequence[Tensor]) -> Tensor:
    total = Tensor(0.0)
    for term in terms:
        total = ops.add(total, term)
    return total


def mse(a: Tensor, b: Tensor) -> Tensor:
    return ops.mean(ops.square(ops.sub(a, b)))


def kl_divergence(latents: Sequence[LatentRecord]) -> Tensor:
    """Mean over steps of ½ Σ_k (μ² + exp(logvar) − logvar − 1)."""
    if not latents:
        return Tensor(0.0)
    one = Tensor(1.0)
    per_step = [
        ops.scale(
            ops.sum(ops.sub(ops.sub(ops.add(ops.square(r.mu), ops.exp(r.logvar)), r.logvar), one)),
            0.5,
        )
        for r in latents
    ]
    return ops.scale(_sum_(per_step), 1.0 / len(per_step))


def weight_l2(model: GeneratorModel) -> Tensor:
    weights = model.store.weights()
    count = sum(w.size for w in weights)
    return ops.scale(_sum_([ops.sum(ops.square(w)) for w in weights]), 1.0 / count)


def compute_loss(
    forward: Sequence,
    backward: Optional[Sequence],
    truth: Sequence,
    latents: Sequence[LatentRecord],
    model: GeneratorModel,
    weights: LossWeights = LossWeights(),
) -> LossReport:
    """
    Loss of one training window. `backward` is None for unidirectional training.

    Raises:
        ShapeMismatchError: chain and ground-truth lengths differ
    """
    n = len(truth)
    if len(forward) != n or (backward is not None and len(backward) != n):
        raise ShapeMismatchError("chains and ground truth must have the same length")
    truth = [as_tensor(frame) for frame in truth]
    forward = [as_tensor(frame) for frame in forward]

    rec_terms = [mse(forward[i], truth[i]) for i in range(n)]
    bd = Tensor(0.0)
    if backward is not None:
        backward = [as_tensor(frame) for frame in backward]
        rec_terms += [mse(backward[i], truth[n - 1 - i]) for i in range(n)]
        bd = _sum_([mse(forward[i], backward[n - 1 - i]) for i in range(n)])
    rec = _sum_(rec_terms)

    kl = kl_divergence(latents) if weights.use_kl else Tensor(0.0)
    l2 = weight_l2(model) if weights.use_l2 else Tensor(0.0)

    total = ops.add(
        ops.add(rec, ops.scale(bd, weights.bidirection)),
        ops.scale(ops.add(kl, l2), weights.regularization),
    )
    return LossReport(
        total=total.item(),
        reconstruct=rec.item(),
        bidirection=bd.item(),
        kl=kl.item(),
        l2=l2.item(),
        graph=total,
    )
