"""
Experiment pipeline.

Stages hand their results to each other through files under the output
directory, so running them one per process gives the same artifacts as
``run_experiment``::

    split.tsv                 prepare_split
    checkpoints/step1.tfr     train_source
    checkpoints/step2.tfr     transfer (TFR modes only)
    history.json              train_source, transfer
    report.json               evaluate, attack

Errors raised inside a stage are tagged with the stage name and seed.
"""

import json
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from loguru import logger

from . import __version__
from .config import TrainConfig, config_fingerprint, format_config
from .dataset.loaders import attach_sensitive, load_interactions, load_sensitive, subsample_users
from .dataset.models import Domain, DomainSplit, InteractionDataset
from .dataset.splits import cold_start_split, leave_one_out
from .dataset.storage import read_split, write_split
from .dataset.synthetic import make_planted_dataset
from .errors import CorruptArtifactError, TransfairError
from .evalkit.attacker import attack_embeddings
from .evalkit.ranking import evaluate_ranking
from .evalkit.report import EvalReport
from .fairstep.networks import FairnessDiscriminator, FilterNetwork
from .fairstep.training import FairModel, Step1Result, step1_train, train_base_model
from .numkit.rng import derive_rng
from .recmodels.models import ModelState, ScorerSpec, init_model
from .transferstep.training import Step2Result, step2_train
from .utils.checkpoint import Checkpoint, load_checkpoint, save_checkpoint

SPLIT_FILE = "split.tsv"
CONFIG_FILE = "config.txt"
STEP1_CHECKPOINT = "checkpoints/step1.tfr"
STEP2_CHECKPOINT = "checkpoints/step2.tfr"
HISTORY_FILE = "history.json"
REPORT_FILE = "report.json"

TFR_MODES = ("tfr_unsupervised", "tfr_supervised")
BASE_DOMAINS: dict[str, tuple[Domain, ...]] = {
    "source_only": ("S",),
    "target_only": ("T",),
    "source_plus_target": ("S", "T"),
}


def build_tag() -> str:
    return f"v{__version__}"


@contextmanager
def stage(name: str, seed: int) -> Iterator[None]:
    """Log stage boundaries and tag package errors with the stage and seed."""
    logger.info(f"Stage {name} started (seed={seed})")
    try:
        yield
    except TransfairError as e:
        e.in_stage(name, seed)
        logger.error(f"Stage {name} failed: {type(e).__name__}: {e}")
        raise
    logger.info(f"Stage {name} finished")


def _artifact(config: TrainConfig, name: str) -> Path:
    return Path(config.output_dir) / name


def load_dataset(config: TrainConfig) -> InteractionDataset:
    """The interaction dataset a config describes, with sensitive labels attached when available."""
    data = config.dataset
    if data.synthetic:
        ds = make_planted_dataset(
            data.synthetic_users, data.synthetic_items, config.seed, planted_strength=data.synthetic_strength
        )
    else:
        assert data.interactions is not None
        ds = load_interactions(data.interactions, data.format, index_space=data.index_space, header=data.header)
        if data.sensitive is not None:
            labels = load_sensitive(
                data.sensitive, data.sensitive_format, token_table=data.token_table, header=data.header
            )
            ds = attach_sensitive(ds, labels)
    if data.user_fraction < 1.0:
        ds = subsample_users(ds, data.user_fraction, config.seed)
    return ds


def prepare_split(config: TrainConfig) -> tuple[InteractionDataset, DomainSplit]:
    """Cold-start split plus leave-one-out, written to ``split.tsv``."""
    with stage("split", config.seed):
        ds = load_dataset(config)
        split = cold_start_split(ds, config.dataset.target_fraction, config.dataset.max_keep, config.seed)
        split = leave_one_out(split, config.seed)
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_split(split, ds, _artifact(config, SPLIT_FILE))
        _artifact(config, CONFIG_FILE).write_text(format_config(config), encoding="utf-8")
    return ds, split


def load_prepared(config: TrainConfig) -> DomainSplit:
    """Re-read the dataset and the split a previous ``prepare_split`` wrote."""
    with stage("load", config.seed):
        ds = load_dataset(config)
        return read_split(_artifact(config, SPLIT_FILE), ds)


def _update_history(config: TrainConfig, key: str, value: dict) -> None:
    path = _artifact(config, HISTORY_FILE)
    history = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
    history[key] = value
    path.write_text(json.dumps(history, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _frozen_meta(model: ModelState) -> dict[str, bool]:
    return dict(sorted(model.frozen_flags().items()))


def step1_checkpoint(result: Step1Result, config: TrainConfig) -> Checkpoint:
    fair = result.fair
    checkpoint = Checkpoint().add_state(fair.model.state_dict("model."))
    if fair.filter is not None:
        checkpoint.add_state(fair.filter.state_dict("filter."))
    if fair.discriminator is not None:
        checkpoint.add_state(fair.discriminator.state_dict("fair_disc."))
    checkpoint.add_state(result.optimizer_state)
    checkpoint.integers.update({"rng/seed": config.seed, "history/best_epoch": result.history.best_epoch})
    checkpoint.meta = {
        "stage": "step1",
        "mode": config.mode,
        "scorer": config.scorer.model_dump(mode="json"),
        "frozen": _frozen_meta(fair.model),
        "has_filter": fair.filter is not None,
        "has_discriminator": fair.discriminator is not None,
        "n_users": fair.model.n_users,
        "n_items": fair.model.n_items,
        "config_fingerprint": config_fingerprint(config),
    }
    return checkpoint


def load_fair_model(checkpoint: Checkpoint, split: DomainSplit, config: TrainConfig) -> FairModel:
    """Rebuild the step-1 artifacts from a checkpoint."""
    meta = checkpoint.meta
    if meta.get("stage") != "step1":
        raise CorruptArtifactError("meta/json", f"expected a step1 checkpoint, found stage {meta.get('stage')!r}")
    spec = ScorerSpec.model_validate(meta["scorer"])
    if (meta["n_users"], meta["n_items"]) != (split.n_users, split.n_items):
        raise CorruptArtifactError(
            "meta/json",
            f"checkpoint covers {meta['n_users']}x{meta['n_items']} users x items, "
            f"split has {split.n_users}x{split.n_items}",
        )
    seed = int(checkpoint.integers.get("rng/seed", config.seed))
    model = init_model(spec, split.n_users, split.n_items, seed)
    try:
        model.load_state_dict(checkpoint.arrays, "model.")
        filter_net = None
        if meta["has_filter"]:
            filter_net = FilterNetwork(spec.dim, derive_rng(seed, "filter"), slope=spec.slope)
            filter_net.load_state_dict(checkpoint.arrays, "filter.")
        disc = None
        if meta["has_discriminator"]:
            step1 = config.step1
            disc = FairnessDiscriminator(
                spec.dim,
                derive_rng(seed, "fair_discriminator"),
                hidden=step1.disc_hidden,
                layers=step1.disc_layers,
                dropout=step1.disc_dropout,
                slope=spec.slope,
            )
            disc.load_state_dict(checkpoint.arrays, "fair_disc.")
    except KeyError as e:
        raise CorruptArtifactError(str(e.args[0]), "entry missing from checkpoint") from e
    model.set_frozen_flags(meta.get("frozen", {}))
    trained = BASE_DOMAINS.get(str(meta["mode"]), ("S",))
    users = np.sort(np.concatenate([split.users(d) for d in trained]))
    return FairModel(model, filter_net, disc, users)


def train_source(config: TrainConfig, split: DomainSplit) -> Step1Result:
    """Step 1 for TFR modes, plain base-model training for the baselines."""
    with stage("train-source", config.seed):
        if config.mode in TFR_MODES:
            result = step1_train(split, config.step1, config.scorer)
        else:
            result = train_base_model(split, config.scorer, config.step1, BASE_DOMAINS[config.mode])
        save_checkpoint(step1_checkpoint(result, config), _artifact(config, STEP1_CHECKPOINT))
        _update_history(config, "step1", result.history.to_dict())
    return result


def load_source(config: TrainConfig, split: DomainSplit) -> FairModel:
    return load_fair_model(load_checkpoint(_artifact(config, STEP1_CHECKPOINT)), split, config)


def step2_checkpoint(result: Step2Result, config: TrainConfig) -> Checkpoint:
    transfer = result.transfer
    checkpoint = Checkpoint().add_state(transfer.state_dict())
    checkpoint.arrays["target.embeddings"] = transfer.embeddings
    checkpoint.add_indices("target.users", transfer.target_users)
    checkpoint.add_state(result.optimizer_state)
    checkpoint.integers.update({"rng/seed": config.seed, "history/rounds": result.history.rounds_run})
    checkpoint.meta = {
        "stage": "step2",
        "mode": config.step2.mode,
        "rec_user_vector": transfer.rec_user_vector,
        "converged": result.history.converged,
        "config_fingerprint": config_fingerprint(config),
    }
    return checkpoint


def transfer(config: TrainConfig, split: DomainSplit) -> Step2Result | None:
    """Step 2, starting from the step-1 checkpoint on disk."""
    if config.mode not in TFR_MODES:
        logger.info(f"Mode {config.mode} has no transfer step")
        return None
    with stage("transfer", config.seed):
        fair = load_source(config, split)
        result = step2_train(fair, split, config.step2)
        save_checkpoint(step2_checkpoint(result, config), _artifact(config, STEP2_CHECKPOINT))
        _update_history(config, "step2", result.history.to_dict())
    return result


def target_vectors(config: TrainConfig, split: DomainSplit) -> tuple[ModelState, np.ndarray]:
    """The scoring model and one recommendation vector per target user, read from the checkpoints."""
    fair = load_source(config, split)
    target = split.users("T")
    if config.mode not in TFR_MODES:
        return fair.model, fair.model.user_embeddings.value[target]
    checkpoint = load_checkpoint(_artifact(config, STEP2_CHECKPOINT))
    users = checkpoint.indices("target.users")
    if not np.array_equal(users, target):
        raise CorruptArtifactError("target.users", "step2 checkpoint was written for a different split")
    return fair.model, checkpoint.require("target.embeddings")


def _with_provenance(report: EvalReport, config: TrainConfig) -> EvalReport:
    return report.model_copy(
        update={
            "mode": config.mode,
            "seed": config.seed,
            "config_fingerprint": config_fingerprint(config),
            "build": build_tag(),
        }
    )


def evaluate(config: TrainConfig, split: DomainSplit) -> EvalReport:
    """Sampled top-N metrics on the target users' test items."""
    with stage("evaluate", config.seed):
        model, vectors = target_vectors(config, split)
        target = split.users("T")
        users = split.evaluable_users("T", "test")
        rows = np.searchsorted(target, users)
        report = evaluate_ranking(
            model,
            vectors[rows],
            split,
            users,
            "test",
            config.seed,
            config.evaluation.ns,
            n_negatives=config.evaluation.n_negatives,
        )
        report = _with_provenance(report, config)
        report.write(_artifact(config, REPORT_FILE))
    return report


def attack(config: TrainConfig, split: DomainSplit, report: EvalReport | None = None) -> EvalReport:
    """Sensitive-attribute attacker on the target users' recommendation vectors."""
    with stage("attack", config.seed):
        if report is None:
            report = EvalReport.read(_artifact(config, REPORT_FILE))
        if split.sensitive is None:
            logger.warning("No sensitive labels available; attacker skipped")
            return report
        _, vectors = target_vectors(config, split)
        labels = split.labels(split.users("T"))
        seeds = [config.seed, *config.attacker.seeds]
        summary = attack_embeddings(vectors, labels, seeds, config.attacker)
        report = report.model_copy(
            update={
                "attacker_auc": summary.mean_auc,
                "attacker_aucs": list(summary.aucs),
                "attacker_seeds": list(summary.seeds),
            }
        )
        report.write(_artifact(config, REPORT_FILE))
        logger.info(f"Attacker AUC on target users: {summary.mean_auc:.4f}")
    return report


def run_experiment(config: TrainConfig) -> EvalReport:
    """Every stage in order; each one reads its inputs back from disk."""
    logger.info(f"Running {config.mode} (seed={config.seed}) into {config.output_dir}")
    prepare_split(config)
    split = load_prepared(config)
    train_source(config, split)
    transfer(config, load_prepared(config))
    split = load_prepared(config)
    report = evaluate(config, split)
    return attack(config, split, report)
