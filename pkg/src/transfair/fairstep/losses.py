"""
The adversarial filtering objective.

The recommender and filter descend on ``L_Rec - lambda_A * L_A`` while the
discriminator descends on ``L_A``; both losses are means over the
interactions of a batch.
"""

from dataclasses import dataclass

import numpy as np

from ..dataset.models import DomainSplit
from ..numkit import ops
from ..numkit.ops import Mode
from ..numkit.optim import Optimizer
from ..numkit.tape import Tape, Tensor
from ..recmodels.models import ModelState
from ..recmodels.scoring import bpr_batch_loss
from .networks import FairnessDiscriminator, FilterNetwork


@dataclass(frozen=True, eq=False)
class Step1Batch:
    """Training examples (u, v+, v-, A_u)."""

    users: np.ndarray
    pos_items: np.ndarray
    neg_items: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.users.size)


@dataclass(frozen=True)
class Step1Loss:
    total: Tensor
    rec: Tensor
    adv: Tensor | None


def filtered_embeddings(
    model: ModelState,
    filter_net: FilterNetwork | None,
    users: np.ndarray,
    mode: Mode = "train",
    *,
    update_stats: bool = True,
) -> Tensor:
    raw = ops.gather_rows(model.user_embeddings, users)
    if filter_net is None:
        return raw
    return filter_net.forward(raw, mode, update_stats=update_stats)


def step1_loss(
    batch: Step1Batch,
    model: ModelState,
    filter_net: FilterNetwork | None,
    disc: FairnessDiscriminator | None,
    lambda_a: float,
    *,
    split: DomainSplit | None = None,
    mode: Mode = "train",
    update_stats: bool = True,
) -> Step1Loss:
    """L1 = L_Rec(f_A(r_u), r_v) - lambda_A * L_A(f_A(r_u), A_u) for one batch.

    Recommendation scores use the filtered embedding. The discriminator is
    evaluated in eval mode; it is frozen while this loss is minimized. With
    ``lambda_a == 0`` the total is the recommendation loss itself.
    """
    if split is not None:
        split.require_domain(batch.users, "S")
    filtered = filtered_embeddings(model, filter_net, batch.users, mode, update_stats=update_stats)
    rec = bpr_batch_loss(model, filtered, batch.pos_items, batch.neg_items, batch.users)
    adv = None
    if disc is not None:
        logits = disc.forward(filtered, "eval")
        adv = ops.sigmoid_bce(logits, batch.labels.reshape(-1, 1))
    if adv is None or lambda_a == 0.0:
        return Step1Loss(rec, rec, adv)
    return Step1Loss(ops.sub(rec, ops.scale(adv, lambda_a)), rec, adv)


def discriminator_loss(disc: FairnessDiscriminator, embeddings: np.ndarray, labels: np.ndarray) -> float:
    """Eval-mode L_A on fixed embeddings."""
    logits = disc.forward(Tensor(embeddings), "eval")
    return ops.sigmoid_bce(logits, np.asarray(labels, dtype=np.float64).reshape(-1, 1)).item()


def discriminator_phase(
    disc: FairnessDiscriminator,
    optimizer: Optimizer,
    embeddings: np.ndarray,
    labels: np.ndarray,
    steps: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """``steps`` Adam updates of D_A on one batch of fixed embeddings.

    Returns the eval-mode L_A on that batch before and after the updates.
    """
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    before = discriminator_loss(disc, embeddings, y)
    x = Tensor(embeddings)
    for _ in range(steps):
        with Tape() as tape:
            loss = ops.sigmoid_bce(disc.forward(x, "train", rng), y)
        optimizer.step(tape.gradient(loss, optimizer.params))
    return before, discriminator_loss(disc, embeddings, y)
