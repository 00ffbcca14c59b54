"""
Domain-matching objectives.

The discriminator maximizes ``log D_d(source) + log(1 - D_d(target))`` and is
trained by descending the negation. The mapping minimizes
``log(1 - D_d(M(seed)))``, or ``-log D_d(M(seed))`` with the non-saturating
flag. Losses are reported as batch means, where an even discriminator scores
2 ln 2; ``discriminator_step`` descends the batch sum by default.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..errors import ShapeError
from ..numkit import ops
from ..numkit.ops import Mode
from ..numkit.optim import Optimizer
from ..numkit.tape import Tape, Tensor
from ..recmodels.models import ModelState
from ..recmodels.scoring import bpr_batch_loss
from .networks import DomainDiscriminator

Reduction = Literal["sum", "mean"]

# Per-pair domain loss of a discriminator that outputs 0.5 everywhere
EVEN_DOMAIN_LOSS = 2.0 * float(np.log(2.0))


@dataclass(frozen=True)
class DomainLoss:
    disc_loss: Tensor
    map_loss: Tensor


@dataclass(frozen=True)
class SupervisedLoss:
    total: Tensor
    rec: Tensor | None
    adv: Tensor | None


def mapping_objective(target_logits: Tensor, *, nonsaturating: bool = False) -> Tensor:
    if nonsaturating:
        return ops.scale(ops.mean_all(ops.log_sigmoid(target_logits)), -1.0)
    return ops.mean_all(ops.log_sigmoid(ops.scale(target_logits, -1.0)))


def domain_loss(
    source: Tensor,
    target: Tensor,
    disc: DomainDiscriminator,
    *,
    mode: Mode = "train",
    rng: np.random.Generator | None = None,
    nonsaturating: bool = False,
    spectral_update: bool = True,
) -> DomainLoss:
    """Discriminator and mapping losses on one source batch and one target batch.

    ``log`` arguments are floored at 1e-12. The spectral vectors advance at
    most once per call.
    """
    if source.rows == 0 or target.rows == 0:
        raise ShapeError(f"domain_loss needs nonempty batches, got {source.rows} source and {target.rows} target rows")
    if source.cols != target.cols:
        raise ShapeError(f"source width {source.cols} differs from target width {target.cols}")
    s = disc.forward(source, mode, rng, spectral_update=spectral_update)
    t = disc.forward(target, mode, rng, spectral_update=False)
    disc_loss = ops.scale(
        ops.add(ops.mean_all(ops.log_sigmoid(s)), ops.mean_all(ops.log_sigmoid(ops.scale(t, -1.0)))),
        -1.0,
    )
    return DomainLoss(disc_loss, mapping_objective(t, nonsaturating=nonsaturating))


def domain_accuracy(disc: DomainDiscriminator, source: np.ndarray, target: np.ndarray) -> float:
    """Eval-mode accuracy with source as the positive class; a zero logit counts as half right."""
    s = disc.forward(Tensor(source), "eval", spectral_update=False).value.reshape(-1)
    t = disc.forward(Tensor(target), "eval", spectral_update=False).value.reshape(-1)
    right = np.sum(s > 0) + np.sum(t < 0) + 0.5 * (np.sum(s == 0) + np.sum(t == 0))
    return float(right / (s.size + t.size))


def discriminator_step(
    disc: DomainDiscriminator,
    optimizer: Optimizer,
    source: np.ndarray,
    target: np.ndarray,
    rng: np.random.Generator,
    *,
    reduction: Reduction = "sum",
) -> float:
    """One descent step of D_d on fixed embeddings; returns the batch-mean loss before the step.

    ``sum`` descends the objective summed over the paired rows, the mean
    scaled by the batch size. The power-iteration estimates are re-converged
    after the update.
    """
    if reduction == "sum" and len(source) != len(target):
        raise ShapeError(f"summed domain loss needs paired batches, got {len(source)} and {len(target)} rows")
    with Tape() as tape:
        losses = domain_loss(Tensor(source), Tensor(target), disc, mode="train", rng=rng)
        objective = losses.disc_loss if reduction == "mean" else ops.scale(losses.disc_loss, float(len(source)))
    optimizer.step(tape.gradient(objective, optimizer.params))
    disc.tighten_spectral_estimates()
    return losses.disc_loss.item()


def supervised_loss(
    model: ModelState,
    rec_vectors: Tensor | None,
    pos_items: np.ndarray,
    neg_items: np.ndarray,
    adv_vectors: Tensor | None,
    disc: DomainDiscriminator | None,
    lambda_d: float,
    *,
    nonsaturating: bool = False,
) -> SupervisedLoss:
    """L2 = L_Rec(target interactions) + lambda_D * mean log(1 - D_d(M(seed))).

    The discriminator runs in eval mode without advancing its spectral
    vectors. Either term may be absent; without interactions the loss is the
    adversarial term alone.
    """
    rec = None
    if rec_vectors is not None and rec_vectors.rows > 0:
        rec = bpr_batch_loss(model, rec_vectors, pos_items, neg_items)
    adv = None
    if disc is not None and adv_vectors is not None and lambda_d != 0.0:
        logits = disc.forward(adv_vectors, "eval", spectral_update=False)
        adv = mapping_objective(logits, nonsaturating=nonsaturating)
    if rec is None and adv is None:
        raise ShapeError("supervised_loss has neither interactions nor an adversarial term")
    if adv is None:
        assert rec is not None
        return SupervisedLoss(rec, rec, None)
    weighted = ops.scale(adv, lambda_d)
    return SupervisedLoss(weighted if rec is None else ops.add(rec, weighted), rec, adv)
