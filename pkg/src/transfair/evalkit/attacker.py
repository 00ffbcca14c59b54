"""
Sensitive-attribute attacker.

A classifier with the fairness discriminator's architecture is trained on
80% of the users' embeddings and scored by AUC on the remaining 20%. An AUC
near 0.5 means the embeddings leak nothing a classifier of that capacity can
find.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ..errors import DegenerateSplitError, ShapeError, TrainingFailureError
from ..numkit import ops
from ..numkit.layers import BinaryClassifier
from ..numkit.optim import Optimizer
from ..numkit.rng import derive_rng
from ..numkit.tape import Tape, Tensor
from .metrics import auc_score


class AttackerConfig(BaseModel):
    """Attacker architecture and schedule."""

    model_config = ConfigDict(extra="forbid")

    hidden: int = Field(default=64, ge=1)
    layers: int = Field(default=6, ge=1)
    dropout: float = Field(default=0.3, ge=0.0, lt=1.0)
    learning_rate: float = Field(default=0.001, gt=0.0)
    batch_size: int = Field(default=256, ge=1)
    max_epochs: int = Field(default=100, ge=1)
    patience: int = Field(default=10, ge=1)
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    validation_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    standardize: bool = Field(
        default=True,
        description="z-score features with training-user statistics; the fairness discriminator sees raw vectors",
    )
    seeds: list[int] = Field(
        default_factory=list, description="Extra attacker seeds; the reported AUC is the mean over all seeds"
    )


@dataclass
class AttackerResult:
    auc: float
    network: BinaryClassifier
    train_users: np.ndarray
    test_users: np.ndarray
    epochs: int
    best_validation_loss: float | None
    resampled: bool
    history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class AttackSummary:
    mean_auc: float
    aucs: tuple[float, ...]
    seeds: tuple[int, ...]


def _both_classes(labels: np.ndarray) -> bool:
    return bool((labels == 0).any() and (labels == 1).any())


def _user_split(labels: np.ndarray, seed: int, test_fraction: float) -> tuple[np.ndarray, np.ndarray, bool]:
    n = labels.size
    n_test = min(max(1, int(round(test_fraction * n))), n - 1)
    for attempt in range(2):
        order = derive_rng(seed, "attacker_split", attempt).permutation(n)
        test, train = order[:n_test], order[n_test:]
        if _both_classes(labels[test]) and _both_classes(labels[train]):
            return train, test, attempt > 0
        if attempt == 0:
            logger.warning(f"Attacker split (seed={seed}) has a single class on one side; resampling once")
    raise DegenerateSplitError(f"attacker split with seed {seed} has a single class after resampling")


def _bce(network: BinaryClassifier, x: np.ndarray, y: np.ndarray) -> float:
    logits = network.forward(Tensor(x), "eval", spectral_update=False)
    return ops.sigmoid_bce(logits, y.reshape(-1, 1)).item()


def train_attacker(
    embeddings: np.ndarray,
    labels: np.ndarray,
    seed: int,
    config: AttackerConfig | None = None,
) -> AttackerResult:
    """Train the attacker on 80% of users and return its AUC on the rest.

    A slice of the training users is held back for early stopping on BCE;
    the best-scoring weights are restored before testing.
    """
    config = config or AttackerConfig()
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels).reshape(-1).astype(np.float64)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ShapeError(f"{x.shape} embeddings for {y.size} labels")
    if not _both_classes(y):
        raise DegenerateSplitError("attacker needs both sensitive classes among the users")

    train, test, resampled = _user_split(y, seed, config.test_fraction)
    n_val = int(round(config.validation_fraction * train.size)) if train.size >= 10 else 0
    val, fit = train[:n_val], train[n_val:]

    if config.standardize:
        mean = x[train].mean(axis=0, keepdims=True)
        std = np.maximum(x[train].std(axis=0, keepdims=True), 1e-12)
        x = (x - mean) / std

    network = BinaryClassifier(
        x.shape[1],
        derive_rng(seed, "attacker_init"),
        hidden=config.hidden,
        layers=config.layers,
        dropout=config.dropout,
        name="attacker.",
    )
    optimizer = Optimizer.adam(network.parameters(), config.learning_rate)
    best_loss: float | None = None
    best_state = network.state_dict()
    stale = 0
    history: list[float] = []
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = fit[derive_rng(seed, "attacker_shuffle", epoch).permutation(fit.size)]
        dropout_rng = derive_rng(seed, "attacker_dropout", epoch)
        for start in range(0, order.size, config.batch_size):
            batch = order[start : start + config.batch_size]
            with Tape() as tape:
                logits = network.forward(Tensor(x[batch]), "train", dropout_rng)
                loss = ops.sigmoid_bce(logits, y[batch].reshape(-1, 1))
            if not np.isfinite(loss.item()):
                raise TrainingFailureError("attacker loss is not finite", stage="attack", epoch=epoch)
            optimizer.step(tape.gradient(loss, optimizer.params))

        if val.size == 0:
            continue
        val_loss = _bce(network, x[val], y[val])
        history.append(val_loss)
        if best_loss is None or val_loss < best_loss:
            best_loss, stale = val_loss, 0
            best_state = {k: v.copy() for k, v in network.state_dict().items()}
        else:
            stale += 1
            if stale >= config.patience:
                logger.debug(f"Attacker early stop at epoch {epoch} (best validation BCE {best_loss:.4f})")
                break

    if best_loss is not None:
        network.load_state_dict(best_state)
    probabilities = network.probability(x[test])
    auc = auc_score(probabilities, y[test].astype(np.int64))
    logger.debug(f"Attacker (seed={seed}): AUC={auc:.4f} on {test.size} test users after {epoch} epochs")
    return AttackerResult(auc, network, train, test, epoch, best_loss, resampled, history)


def attack_embeddings(
    embeddings: np.ndarray,
    labels: np.ndarray,
    seeds: Sequence[int],
    config: AttackerConfig | None = None,
) -> AttackSummary:
    """Mean attacker AUC over independent attacker seeds."""
    if not seeds:
        raise ValueError("at least one attacker seed is required")
    aucs = tuple(train_attacker(embeddings, labels, int(s), config).auc for s in seeds)
    return AttackSummary(float(np.mean(aucs)), aucs, tuple(int(s) for s in seeds))
