"""
Step-2 training: embeddings for cold-start target users.

Target users get randomly initialized seed vectors that a mapping network M
sends into the fair source space. A domain discriminator plays against M so
that mapped target embeddings become indistinguishable from the fair source
embeddings. Everything trained in step 1 stays frozen.

Unsupervised mode uses no target interactions at all. Supervised mode adds
BPR on the target training interactions and early-stops on target
validation NDCG.
"""

from collections import deque
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ..dataset.models import DomainSplit
from ..dataset.sampling import NegativeSampler, minibatches
from ..errors import DomainError, EmptyDatasetError, TrainingFailureError
from ..evalkit.candidates import build_candidates
from ..evalkit.ranking import evaluate_ranking
from ..fairstep.training import EarlyStopper, FairModel
from ..numkit import ops
from ..numkit.optim import Optimizer
from ..numkit.rng import derive_rng
from ..numkit.tape import Tape, Tensor
from ..utils.checkpoint import state_digest
from .losses import (
    EVEN_DOMAIN_LOSS,
    Reduction,
    discriminator_step,
    domain_accuracy,
    mapping_objective,
    supervised_loss,
)
from .networks import DomainDiscriminator, MappingFunction

Step2Mode = Literal["unsupervised", "supervised"]
UserVectorSource = Literal["mapped", "raw"]

SEED_STD = 0.01


class Step2Config(BaseModel):
    """Hyperparameters of the transfer step."""

    model_config = ConfigDict(extra="forbid")

    mode: Step2Mode = "unsupervised"
    lambda_d: float = Field(default=1.0, ge=0.0, description="Weight of the domain term in supervised mode")
    learning_rate: float = Field(default=0.001, gt=0.0, description="Adam rate for M (and target parameters)")
    disc_learning_rate: float = Field(default=0.001, gt=0.0, description="SGD rate for the domain discriminator")
    disc_reduction: Reduction = Field(
        default="sum", description="Descend D_d on the batch-summed (sum) or batch-averaged (mean) objective"
    )
    max_rounds: int = Field(default=2000, ge=0, description="Unsupervised round budget")
    min_rounds: int = Field(default=300, ge=0, description="Rounds before convergence is checked")
    window: int = Field(default=50, ge=1, description="Trailing rounds averaged for the convergence check")
    tolerance: float = Field(default=0.05, gt=0.0, lt=0.5, description="Allowed |accuracy - 0.5| at convergence")
    engage_margin: float = Field(
        default=0.05,
        ge=0.0,
        description="Convergence also needs the discriminator loss to have dropped this far below 2 ln 2 once",
    )
    batch_size: int = Field(default=256, ge=2, description="Source and target rows per domain batch")
    rec_batch_size: int = Field(default=512, ge=1, description="Target interactions per supervised batch")
    seed_dim: int | None = Field(default=None, ge=1, description="Width k of the target seeds; defaults to d")
    hidden: int = Field(default=64, ge=1)
    disc_hidden: int = Field(default=64, ge=1)
    disc_layers: int = Field(default=6, ge=1)
    disc_dropout: float = Field(default=0.3, ge=0.0, lt=1.0)
    nonsaturating: bool = Field(default=False, description="Train M on -log D_d(M(seed)) instead of log(1 - D_d)")
    rec_user_vector: UserVectorSource = Field(
        default="mapped", description="Score target users with M(seed) or with trainable raw embeddings"
    )
    adversarial: bool = True
    max_epochs: int = Field(default=50, ge=0, description="Supervised epoch budget")
    patience: int = Field(default=5, ge=1)
    eval_negatives: int = Field(default=100, ge=1)
    eval_n: int = Field(default=10, ge=1)
    seed: int = 0


def init_target_seeds(n_users: int, seed_dim: int, seed: int) -> np.ndarray:
    """N(0, 0.01^2) seed vectors, one row per target user."""
    return derive_rng(seed, "target_seeds").normal(0.0, SEED_STD, size=(n_users, seed_dim))


@dataclass
class Step2Round:
    round: int
    disc_loss: float | None
    map_loss: float | None
    accuracy: float | None
    rec_loss: float | None = None
    epoch: int | None = None


@dataclass
class Step2History:
    rounds: list[Step2Round] = field(default_factory=list)
    validation: list[tuple[int, float]] = field(default_factory=list)
    converged: bool = False
    best_epoch: int = 0
    lowest_disc_loss: float | None = None

    def record_disc_loss(self, value: float) -> None:
        if self.lowest_disc_loss is None or value < self.lowest_disc_loss:
            self.lowest_disc_loss = value

    def engaged(self, margin: float) -> bool:
        """Whether the discriminator ever beat the even-odds loss by ``margin``."""
        return self.lowest_disc_loss is not None and self.lowest_disc_loss <= EVEN_DOMAIN_LOSS - margin

    @property
    def rounds_run(self) -> int:
        return len(self.rounds)

    def to_dict(self) -> dict:
        return {
            "rounds": [asdict(r) for r in self.rounds],
            "validation": [{"epoch": e, "ndcg": v} for e, v in self.validation],
            "converged": self.converged,
            "best_epoch": self.best_epoch,
            "lowest_disc_loss": self.lowest_disc_loss,
        }


@dataclass
class TransferModel:
    """Trained step-2 artifacts for the target users."""

    target_users: np.ndarray
    seeds: Tensor
    mapping: MappingFunction
    discriminator: DomainDiscriminator | None
    raw: Tensor | None = None
    rec_user_vector: UserVectorSource = "mapped"

    def _rows(self, users: np.ndarray) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64).reshape(-1)
        outside = np.setdiff1d(users, self.target_users)
        if outside.size:
            raise DomainError(f"users {outside[:10].tolist()} are not target users")
        return np.searchsorted(self.target_users, users)

    def mapped(self, users: np.ndarray | None = None) -> np.ndarray:
        """Eval-mode M(seed_u)."""
        rows = np.arange(self.target_users.size) if users is None else self._rows(users)
        if rows.size == 0:
            return np.zeros((0, self.mapping.out_features))
        return self.mapping.forward(Tensor(self.seeds.value[rows]), "eval").value

    def user_vectors(self, users: np.ndarray) -> np.ndarray:
        """The vectors recommendation uses for ``users``."""
        if self.rec_user_vector == "raw" and self.raw is not None:
            return self.raw.value[self._rows(users)]
        return self.mapped(users)

    @property
    def embeddings(self) -> np.ndarray:
        return self.user_vectors(self.target_users)

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {"target.seeds": self.seeds.value, **self.mapping.state_dict("mapping.")}
        if self.raw is not None:
            state["target.raw"] = self.raw.value
        if self.discriminator is not None:
            state.update(self.discriminator.state_dict("domain_disc."))
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        self.seeds.value = np.asarray(state["target.seeds"], dtype=np.float64).reshape(self.seeds.shape).copy()
        self.mapping.load_state_dict(state, "mapping.")
        if self.raw is not None:
            self.raw.value = np.asarray(state["target.raw"], dtype=np.float64).reshape(self.raw.shape).copy()
        if self.discriminator is not None:
            self.discriminator.load_state_dict(state, "domain_disc.")


@dataclass
class Step2Result:
    transfer: TransferModel
    history: Step2History
    optimizer_state: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def embeddings(self) -> np.ndarray:
        return self.transfer.embeddings


def source_side_digest(fair: FairModel) -> str:
    """Hash of every step-1 parameter and statistic."""
    states = [fair.model.state_dict()]
    if fair.filter is not None:
        states.append(fair.filter.state_dict())
    if fair.discriminator is not None:
        states.append(fair.discriminator.state_dict())
    return state_digest(*states)


@contextmanager
def frozen_source(fair: FairModel) -> Iterator[None]:
    """Mark all step-1 tensors frozen and verify they come out bit-identical."""
    tensors = fair.model.parameters(trainable_only=False)
    for net in (fair.filter, fair.discriminator):
        if net is not None:
            tensors += net.parameters()
    flags = [t.trainable for t in tensors]
    before = source_side_digest(fair)
    for tensor in tensors:
        tensor.trainable = False
    try:
        yield
    finally:
        for tensor, flag in zip(tensors, flags, strict=True):
            tensor.trainable = flag
    if source_side_digest(fair) != before:
        raise TrainingFailureError("source-side parameters changed during the transfer step", stage="step2")


def _build_networks(
    dim: int, seed_dim: int, config: Step2Config, slope: float
) -> tuple[MappingFunction, DomainDiscriminator | None]:
    mapping = MappingFunction(seed_dim, dim, derive_rng(config.seed, "mapping"), hidden=config.hidden, slope=slope)
    disc = None
    if config.adversarial:
        disc = DomainDiscriminator(
            dim,
            derive_rng(config.seed, "domain_discriminator"),
            hidden=config.disc_hidden,
            layers=config.disc_layers,
            dropout=config.disc_dropout,
            slope=slope,
        )
    return mapping, disc


def _check_finite(value: float, what: str, round_index: int) -> None:
    if not np.isfinite(value):
        raise TrainingFailureError(f"non-finite {what}", stage="step2", epoch=round_index)


def _sample(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    return rng.integers(0, size, size=count)


def align_domains(
    source_pool: np.ndarray,
    seeds: Tensor,
    mapping: MappingFunction,
    disc: DomainDiscriminator,
    config: Step2Config,
) -> tuple[Step2History, dict[str, np.ndarray]]:
    """Unsupervised domain game between M and D_d.

    Each round samples source rows and target seeds with replacement, takes
    one SGD step of D_d on the full domain objective and then one Adam step
    of M on the mapping objective. Training stops once the discriminator's
    accuracy, averaged over the trailing window, sits within ``tolerance`` of
    0.5 (checked from ``min_rounds`` on), or after ``max_rounds``.

    A discriminator whose loss never fell ``engage_margin`` below 2 ln 2 has
    not told the domains apart at any point, so its chance-level accuracy does
    not count as convergence.
    """
    seed = config.seed
    history = Step2History()
    disc_optimizer = Optimizer.sgd(disc.parameters(), config.disc_learning_rate)
    map_optimizer = Optimizer.adam(mapping.parameters(), config.learning_rate)
    if source_pool.shape[0] == 0 or seeds.rows == 0:
        logger.warning("Domain alignment skipped: no source or no target users")
        return history, map_optimizer.state_dict("optim.mapping.")

    rng = derive_rng(seed, "step2", "batches")
    recent: deque[float] = deque(maxlen=config.window)
    for round_index in range(1, config.max_rounds + 1):
        source = source_pool[_sample(rng, source_pool.shape[0], config.batch_size)]
        target_in = Tensor(seeds.value[_sample(rng, seeds.rows, config.batch_size)])

        fixed = mapping.forward(target_in, "train", update_stats=False).value
        dropout_rng = derive_rng(seed, "step2", "dropout", round_index)
        disc_loss = discriminator_step(
            disc, disc_optimizer, source, fixed, dropout_rng, reduction=config.disc_reduction
        )
        _check_finite(disc_loss, "domain discriminator loss", round_index)
        history.record_disc_loss(disc_loss)

        with Tape() as tape:
            mapped = mapping.forward(target_in, "train")
            map_loss = mapping_objective(
                disc.forward(mapped, "eval", spectral_update=False), nonsaturating=config.nonsaturating
            )
        _check_finite(map_loss.item(), "mapping loss", round_index)
        map_optimizer.step(tape.gradient(map_loss, map_optimizer.params))

        accuracy = domain_accuracy(disc, source, mapping.forward(target_in, "train", update_stats=False).value)
        recent.append(accuracy)
        history.rounds.append(Step2Round(round_index, disc_loss, map_loss.item(), accuracy))
        logger.trace(f"[step2] round {round_index}: disc={disc_loss:.5f} map={map_loss.item():.5f} acc={accuracy:.3f}")
        if round_index % 100 == 0:
            logger.debug(f"[step2] round {round_index}: trailing accuracy {np.mean(recent):.3f}")
        if (
            round_index >= config.min_rounds
            and len(recent) == config.window
            and abs(float(np.mean(recent)) - 0.5) <= config.tolerance
            and history.engaged(config.engage_margin)
        ):
            history.converged = True
            break

    logger.info(
        f"[step2] unsupervised alignment {'converged' if history.converged else 'stopped'} "
        f"after {history.rounds_run} rounds"
    )
    if history.rounds and not history.engaged(config.engage_margin):
        logger.warning(
            f"[step2] the domain discriminator never separated the domains "
            f"(lowest loss {history.lowest_disc_loss:.4f}, even odds {EVEN_DOMAIN_LOSS:.4f})"
        )
    state = map_optimizer.state_dict("optim.mapping.")
    state.update(disc_optimizer.state_dict("optim.domain_disc."))
    return history, state


def step2_unsupervised(
    fair: FairModel,
    split: DomainSplit,
    config: Step2Config,
    *,
    seeds: np.ndarray | None = None,
) -> Step2Result:
    """Learn M from the fair source embeddings alone; no target interaction is read."""
    source_pool = fair.user_vectors(split.users("S"))
    target_users = split.users("T")
    dim = fair.model.dim
    seed_dim = config.seed_dim or dim
    if seeds is None:
        seeds = init_target_seeds(target_users.size, seed_dim, config.seed)
    seeds_tensor = Tensor(seeds, name="target.seeds")
    mapping, disc = _build_networks(dim, seeds_tensor.cols, config, fair.model.spec.slope)

    with frozen_source(fair):
        if disc is None:
            logger.warning("Unsupervised transfer without the domain game leaves M at its initialization")
            history, optimizer_state = Step2History(), {}
        else:
            history, optimizer_state = align_domains(source_pool, seeds_tensor, mapping, disc, config)
    transfer = TransferModel(target_users, seeds_tensor, mapping, disc)
    return Step2Result(transfer, history, optimizer_state)


def step2_supervised(
    fair: FairModel,
    split: DomainSplit,
    config: Step2Config,
    *,
    seeds: np.ndarray | None = None,
) -> Step2Result:
    """Fit M and the target seeds on target training interactions plus the domain term.

    Target users without training interactions still take part in the
    domain term through their seeds.
    """
    seed = config.seed
    stage = "step2"
    model = fair.model
    source_pool = fair.user_vectors(split.users("S"))
    target_users = split.users("T")
    users, items = split.pairs("T", "train")
    if users.size == 0:
        raise EmptyDatasetError("supervised transfer needs target training interactions")
    rows = np.searchsorted(target_users, users)
    idle = target_users.size - np.unique(users).size
    if idle:
        logger.info(f"[{stage}] {idle} target users have no training items; they enter the domain term only")

    dim = model.dim
    seed_dim = config.seed_dim or dim
    if seeds is None:
        seeds = init_target_seeds(target_users.size, seed_dim, seed)
    seeds_tensor = Tensor(seeds, name="target.seeds", trainable=True)
    mapping, disc = _build_networks(dim, seeds_tensor.cols, config, model.spec.slope)
    raw = None
    if config.rec_user_vector == "raw":
        raw = Tensor(model.user_embeddings.value[target_users].copy(), name="target.raw", trainable=True)
    transfer = TransferModel(target_users, seeds_tensor, mapping, disc, raw, config.rec_user_vector)

    use_adv = disc is not None and config.lambda_d != 0.0
    params = [seeds_tensor, *mapping.parameters()]
    if raw is not None:
        params = [raw, *params] if use_adv else [raw]
    optimizer = Optimizer.adam(params, config.learning_rate)
    disc_optimizer = Optimizer.sgd(disc.parameters(), config.disc_learning_rate) if disc is not None else None

    val_users = split.evaluable_users("T", "val")
    val_candidates = build_candidates(split, val_users, "val", seed, config.eval_negatives) if val_users.size else None
    if val_candidates is not None and len(val_candidates) == 0:
        val_candidates = None
    if val_candidates is None:
        logger.warning(f"[{stage}] no target validation users; training for all {config.max_epochs} epochs")

    history = Step2History()
    stopper = EarlyStopper(config.patience)
    best = {k: v.copy() for k, v in transfer.state_dict().items()}
    min_batch = 2 if raw is None and not use_adv else 1
    round_index = 0

    with frozen_source(fair):
        sampler = NegativeSampler(split, users)
        for epoch in range(1, config.max_epochs + 1):
            negatives = sampler.sample(users, derive_rng(seed, stage, "negatives", epoch))
            order = derive_rng(seed, stage, "shuffle", epoch).permutation(users.size)
            for b, idx in enumerate(minibatches(order, config.rec_batch_size, min_batch)):
                round_index += 1
                round_rng = derive_rng(seed, stage, "domain", epoch, b)
                adv_rows = _sample(round_rng, target_users.size, config.batch_size) if use_adv else idx[:0]

                with Tape() as tape:
                    if raw is None:
                        stacked = ops.gather_rows(seeds_tensor, np.concatenate([rows[idx], adv_rows]))
                        mapped = mapping.forward(stacked, "train")
                        rec_vectors = ops.gather_rows(mapped, np.arange(idx.size))
                        adv_vectors = ops.gather_rows(mapped, np.arange(idx.size, idx.size + adv_rows.size))
                    else:
                        rec_vectors = ops.gather_rows(raw, rows[idx])
                        adv_vectors = (
                            mapping.forward(ops.gather_rows(seeds_tensor, adv_rows), "train") if use_adv else None
                        )
                    losses = supervised_loss(
                        model,
                        rec_vectors,
                        items[idx],
                        negatives[idx],
                        adv_vectors if use_adv else None,
                        disc,
                        config.lambda_d,
                        nonsaturating=config.nonsaturating,
                    )
                _check_finite(losses.total.item(), "supervised transfer loss", round_index)
                optimizer.step(tape.gradient(losses.total, optimizer.params))

                disc_loss = accuracy = None
                if disc is not None and disc_optimizer is not None:
                    source = source_pool[_sample(round_rng, source_pool.shape[0], config.batch_size)]
                    target_in = Tensor(seeds_tensor.value[_sample(round_rng, target_users.size, config.batch_size)])
                    fixed = mapping.forward(target_in, "train", update_stats=False).value
                    disc_loss = discriminator_step(
                        disc,
                        disc_optimizer,
                        source,
                        fixed,
                        derive_rng(seed, stage, "dropout", epoch, b),
                        reduction=config.disc_reduction,
                    )
                    _check_finite(disc_loss, "domain discriminator loss", round_index)
                    history.record_disc_loss(disc_loss)
                    accuracy = domain_accuracy(disc, source, fixed)
                rec = None if losses.rec is None else losses.rec.item()
                adv = None if losses.adv is None else losses.adv.item()
                history.rounds.append(Step2Round(round_index, disc_loss, adv, accuracy, rec, epoch))

            if val_candidates is None:
                best = {k: v.copy() for k, v in transfer.state_dict().items()}
                history.best_epoch = epoch
                continue
            report = evaluate_ranking(
                model,
                transfer.user_vectors(val_candidates.users),
                split,
                val_candidates.users,
                "val",
                seed,
                (config.eval_n,),
                candidates=val_candidates,
            )
            ndcg = report.metrics[f"ndcg@{config.eval_n}"]
            history.validation.append((epoch, ndcg))
            logger.info(f"[{stage}] epoch {epoch}: target val ndcg@{config.eval_n}={ndcg:.4f}")
            if stopper.update(ndcg, epoch):
                best = {k: v.copy() for k, v in transfer.state_dict().items()}
                history.best_epoch = epoch
            elif stopper.should_stop:
                logger.debug(f"[{stage}] early stop at epoch {epoch}; best epoch {stopper.best_epoch}")
                break

    transfer.load_state_dict(best)
    optimizer_state = optimizer.state_dict("optim.transfer.")
    if disc_optimizer is not None:
        optimizer_state.update(disc_optimizer.state_dict("optim.domain_disc."))
    return Step2Result(transfer, history, optimizer_state)


def step2_train(
    fair: FairModel, split: DomainSplit, config: Step2Config, *, seeds: np.ndarray | None = None
) -> Step2Result:
    if config.mode == "supervised":
        return step2_supervised(fair, split, config, seeds=seeds)
    return step2_unsupervised(fair, split, config, seeds=seeds)
