"""
Step-1 training: a fair recommender for source users.

``step1_train`` alternates (a) one Adam step of the recommender and filter on
the filtering objective with (b) ``t`` Adam steps of the fairness
discriminator on the same batch. ``train_base_model`` runs the same loop
without filter or discriminator and backs the non-adversarial baselines.
Both stop early on validation NDCG@10 and return the best snapshot.
"""

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ..dataset.models import Domain, DomainSplit
from ..dataset.sampling import NegativeSampler, minibatches
from ..errors import DomainError, EmptyDatasetError, TrainingFailureError
from ..evalkit.candidates import build_candidates
from ..evalkit.ranking import evaluate_ranking
from ..numkit import ops
from ..numkit.optim import Optimizer
from ..numkit.rng import derive_rng
from ..numkit.tape import Tape
from ..recmodels.models import ModelState, ScorerSpec, init_model
from ..recmodels.scoring import batch_l2_penalty
from .losses import Step1Batch, discriminator_phase, filtered_embeddings, step1_loss
from .networks import FairnessDiscriminator, FilterNetwork


class Step1Config(BaseModel):
    """Hyperparameters of the fair source model."""

    model_config = ConfigDict(extra="forbid")

    lambda_a: float = Field(default=10.0, ge=0.0, description="Adversarial coefficient lambda_A")
    disc_steps: int = Field(default=10, ge=1, description="Discriminator updates per alternation (t)")
    learning_rate: float = Field(default=0.001, gt=0.0)
    disc_learning_rate: float = Field(default=0.001, gt=0.0)
    l2: float = Field(default=1e-5, ge=0.0, description="L2 coefficient on trainable parameters")
    batch_size: int = Field(default=512, ge=2)
    max_epochs: int = Field(default=50, ge=0)
    patience: int = Field(default=5, ge=1, description="Epochs without validation improvement before stopping")
    disc_hidden: int = Field(default=64, ge=1)
    disc_layers: int = Field(default=6, ge=1)
    disc_dropout: float = Field(default=0.3, ge=0.0, lt=1.0)
    eval_negatives: int = Field(default=100, ge=1)
    eval_n: int = Field(default=10, ge=1, description="N of the NDCG@N early-stopping metric")
    seed: int = 0


class EarlyStopper:
    """Tracks the best validation score and how long ago it was seen."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best: float | None = None
        self.best_epoch = 0
        self.stale = 0

    def update(self, value: float, epoch: int) -> bool:
        if self.best is None or value > self.best:
            self.best, self.best_epoch, self.stale = value, epoch, 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


@dataclass
class Step1Round:
    epoch: int
    batch: int
    rec_loss: float
    adv_loss: float | None
    disc_loss_before: float | None
    disc_loss_after: float | None


@dataclass
class Step1History:
    rounds: list[Step1Round] = field(default_factory=list)
    validation: list[tuple[int, float]] = field(default_factory=list)
    best_epoch: int = 0
    epochs_run: int = 0

    def to_dict(self) -> dict:
        return {
            "rounds": [asdict(r) for r in self.rounds],
            "validation": [{"epoch": e, "ndcg": v} for e, v in self.validation],
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
        }


@dataclass
class FairModel:
    """Step-1 artifacts: recommender, filter and discriminator plus the source users."""

    model: ModelState
    filter: FilterNetwork | None
    discriminator: FairnessDiscriminator | None
    source_users: np.ndarray

    def user_vectors(self, users: np.ndarray) -> np.ndarray:
        return fair_user_embedding(self.model, self.filter, users, source_users=self.source_users)


@dataclass
class Step1Result:
    fair: FairModel
    history: Step1History
    optimizer_state: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def model(self) -> ModelState:
        return self.fair.model


def fair_user_embedding(
    model: ModelState,
    filter_net: FilterNetwork | None,
    users: int | np.ndarray,
    *,
    source_users: np.ndarray | None = None,
) -> np.ndarray:
    """f_A(r_u) in eval mode (running statistics, no dropout).

    A single user index gives a 1-D vector, an index array a matrix.
    """
    single = np.ndim(users) == 0
    index = np.atleast_1d(np.asarray(users, dtype=np.int64))
    if source_users is not None:
        outside = np.setdiff1d(index, source_users)
        if outside.size:
            raise DomainError(f"users {outside[:10].tolist()} are not source users")
    vectors = filtered_embeddings(model, filter_net, index, "eval").value
    return vectors[0] if single else vectors


def _training_pairs(split: DomainSplit, domains: Sequence[Domain]) -> tuple[np.ndarray, np.ndarray]:
    users, items = zip(*(split.pairs(d, "train") for d in domains), strict=True)
    return np.concatenate(users), np.concatenate(items)


def _snapshot(*parts) -> list[dict[str, np.ndarray]]:
    return [{k: v.copy() for k, v in part.state_dict().items()} for part in parts if part is not None]


def _restore(snapshot: list[dict[str, np.ndarray]], *parts) -> None:
    for state, part in zip(snapshot, [p for p in parts if p is not None], strict=True):
        part.load_state_dict(state)


def _fit(
    split: DomainSplit,
    model: ModelState,
    config: Step1Config,
    *,
    domains: Sequence[Domain],
    filter_net: FilterNetwork | None,
    disc: FairnessDiscriminator | None,
    stage: str,
) -> tuple[Step1History, dict[str, np.ndarray]]:
    seed = config.seed
    users, items = _training_pairs(split, domains)
    if users.size == 0:
        raise EmptyDatasetError(f"no training interactions in domains {list(domains)}")
    labels = split.labels(users).astype(np.float64) if disc is not None else np.zeros(users.size)

    val_users = np.concatenate([split.evaluable_users(d, "val") for d in domains])
    val_candidates = (
        build_candidates(split, val_users, "val", seed, config.eval_negatives) if val_users.size else None
    )
    if val_candidates is None or len(val_candidates) == 0:
        logger.warning(f"[{stage}] no validation users; training for all {config.max_epochs} epochs")
        val_candidates = None

    sampler = NegativeSampler(split, users)
    params = model.parameters() + (filter_net.parameters() if filter_net is not None else [])
    optimizer = Optimizer.adam(params, config.learning_rate)
    disc_optimizer = Optimizer.adam(disc.parameters(), config.disc_learning_rate) if disc is not None else None
    stopper = EarlyStopper(config.patience)
    history = Step1History()
    best = _snapshot(model, filter_net, disc)
    min_batch = 2 if filter_net is not None else 1

    logger.info(
        f"[{stage}] training on {users.size} interactions from domains {list(domains)} "
        f"(lambda_a={config.lambda_a if disc is not None else 0}, max_epochs={config.max_epochs})"
    )
    for epoch in range(1, config.max_epochs + 1):
        negatives = sampler.sample(users, derive_rng(seed, stage, "negatives", epoch))
        order = derive_rng(seed, stage, "shuffle", epoch).permutation(users.size)
        rec_total = 0.0
        for b, idx in enumerate(minibatches(order, config.batch_size, min_batch)):
            batch = Step1Batch(users[idx], items[idx], negatives[idx], labels[idx])
            with Tape() as tape:
                losses = step1_loss(batch, model, filter_net, disc, config.lambda_a)
                objective = losses.total
                if config.l2 > 0.0:
                    touched = np.concatenate([batch.pos_items, batch.neg_items])
                    extra = filter_net.parameters() if filter_net is not None else []
                    objective = ops.add(objective, batch_l2_penalty(model, batch.users, touched, config.l2, extra))
            if not np.isfinite(objective.item()):
                raise TrainingFailureError("non-finite recommender loss", stage=stage, epoch=epoch)
            optimizer.step(tape.gradient(objective, optimizer.params))

            before = after = None
            if disc is not None and disc_optimizer is not None:
                embedded = filtered_embeddings(model, filter_net, batch.users, "train", update_stats=False).value
                before, after = discriminator_phase(
                    disc,
                    disc_optimizer,
                    embedded,
                    batch.labels,
                    config.disc_steps,
                    derive_rng(seed, stage, "disc_dropout", epoch, b),
                )
                if not (np.isfinite(before) and np.isfinite(after)):
                    raise TrainingFailureError("non-finite discriminator loss", stage=stage, epoch=epoch)
            adv = None if losses.adv is None else losses.adv.item()
            history.rounds.append(Step1Round(epoch, b, losses.rec.item(), adv, before, after))
            rec_total += losses.rec.item() * len(batch)
            logger.trace(f"[{stage}] epoch {epoch} batch {b}: rec={losses.rec.item():.5f} adv={adv}")
        history.epochs_run = epoch

        if val_candidates is None:
            best = _snapshot(model, filter_net, disc)
            history.best_epoch = epoch
            continue
        vectors = filtered_embeddings(model, filter_net, val_candidates.users, "eval").value
        report = evaluate_ranking(
            model, vectors, split, val_candidates.users, "val", seed, (config.eval_n,), candidates=val_candidates
        )
        ndcg = report.metrics[f"ndcg@{config.eval_n}"]
        history.validation.append((epoch, ndcg))
        mean_rec = rec_total / users.size
        logger.info(f"[{stage}] epoch {epoch}: rec_loss={mean_rec:.5f} val ndcg={ndcg:.4f}")
        if stopper.update(ndcg, epoch):
            best = _snapshot(model, filter_net, disc)
            history.best_epoch = epoch
        elif stopper.should_stop:
            logger.debug(f"[{stage}] early stop at epoch {epoch}; best epoch {stopper.best_epoch}")
            break

    _restore(best, model, filter_net, disc)
    optimizer_state = optimizer.state_dict("optim.rec.")
    if disc_optimizer is not None:
        optimizer_state.update(disc_optimizer.state_dict("optim.fair_disc."))
    return history, optimizer_state


def step1_train(
    split: DomainSplit,
    config: Step1Config,
    spec: ScorerSpec,
    *,
    model: ModelState | None = None,
    adversary: bool = True,
) -> Step1Result:
    """Train recommender, filter and fairness discriminator on the source users.

    With ``adversary=False`` the filter is trained for recommendation alone;
    with ``lambda_a == 0`` the adversary still trains but never feeds back,
    which yields the same recommender and filter bit for bit.
    """
    source = split.users("S")
    if source.size == 0:
        raise EmptyDatasetError("split has no source users")
    seed = config.seed
    model = model or init_model(spec, split.n_users, split.n_items, seed)
    filter_net = FilterNetwork(spec.dim, derive_rng(seed, "filter"), slope=spec.slope)
    disc = (
        FairnessDiscriminator(
            spec.dim,
            derive_rng(seed, "fair_discriminator"),
            hidden=config.disc_hidden,
            layers=config.disc_layers,
            dropout=config.disc_dropout,
            slope=spec.slope,
        )
        if adversary
        else None
    )
    history, optimizer_state = _fit(
        split, model, config, domains=("S",), filter_net=filter_net, disc=disc, stage="step1"
    )
    return Step1Result(FairModel(model, filter_net, disc, source), history, optimizer_state)


def train_base_model(
    split: DomainSplit,
    spec: ScorerSpec,
    config: Step1Config,
    domains: Sequence[Domain] = ("S",),
    *,
    model: ModelState | None = None,
) -> Step1Result:
    """Plain BPR training on the given domains: no filter, no adversary."""
    model = model or init_model(spec, split.n_users, split.n_items, config.seed)
    history, optimizer_state = _fit(split, model, config, domains=domains, filter_net=None, disc=None, stage="base")
    trained = np.concatenate([split.users(d) for d in domains])
    return Step1Result(FairModel(model, None, None, np.sort(trained)), history, optimizer_state)

