"""
Experiment configuration.

A config file is flat UTF-8 text of ``key = value`` lines. ``#`` starts a
comment line, dotted keys address nested sections (``step1.lambda_a = 10``)
and list values are comma separated (``evaluation.ns = 5,10``). Mapping
values use ``key:value`` pairs (``dataset.token_table = F:1,M:0``).

The top-level ``seed`` is the single source of randomness: it is copied into
every stage config.
"""

import hashlib
import json
import types
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any, Literal, Union, get_args, get_origin

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .dataset.loaders import DEFAULT_TOKEN_TABLE, IndexSpace, InteractionFormat, SensitiveFormat
from .errors import ConfigError
from .evalkit.attacker import AttackerConfig
from .evalkit.ranking import DEFAULT_NS
from .fairstep.training import Step1Config
from .recmodels.models import ScorerSpec
from .transferstep.training import Step2Config

ExperimentMode = Literal["source_plus_target", "target_only", "source_only", "tfr_unsupervised", "tfr_supervised"]
EXPERIMENT_MODES: tuple[str, ...] = get_args(ExperimentMode)

LAMBDA_A_GRID = (0.0, 1.0, 5.0, 10.0)
L2_GRID = (0.0, 1e-4, 1e-5, 1e-6)
LAMBDA_D_RANGE = (1.0, 10.0)
DISC_LR_RANGE = (1e-4, 1e-3)
DISC_DROPOUT_RANGE = (0.3, 0.5)


class DatasetConfig(BaseModel):
    """Where the interactions come from and how they are split."""

    model_config = ConfigDict(extra="forbid")

    interactions: Path | None = None
    format: InteractionFormat = "tsv"
    sensitive: Path | None = None
    sensitive_format: SensitiveFormat = "tsv"
    header: bool = False
    index_space: IndexSpace = "dense"
    token_table: dict[str, int] = Field(default_factory=lambda: dict(DEFAULT_TOKEN_TABLE))
    user_fraction: float = Field(default=1.0, gt=0.0, le=1.0, description="Share of users kept (seeded subsample)")
    target_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    max_keep: int = Field(default=5, ge=1, description="Interactions kept per target user")
    synthetic: bool = Field(default=False, description="Use the planted-attribute synthetic dataset")
    synthetic_users: int = Field(default=1000, ge=10)
    synthetic_items: int = Field(default=500, ge=10)
    synthetic_strength: float = Field(
        default=1.5, ge=0.0, description="Logit gap between the groups' preferred item halves in the synthetic data"
    )

    @model_validator(mode="after")
    def check_source(self) -> "DatasetConfig":
        if not self.synthetic and self.interactions is None:
            raise ValueError("dataset.interactions is required unless dataset.synthetic = true")
        return self


class EvaluationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ns: list[int] = Field(default_factory=lambda: list(DEFAULT_NS))
    n_negatives: int = Field(default=100, ge=1)


def _in_grid(value: float, grid: Iterable[float]) -> bool:
    return any(abs(value - g) <= 1e-12 * max(1.0, abs(g)) for g in grid)


def _in_range(value: float, bounds: tuple[float, float]) -> bool:
    low, high = bounds
    return low * (1 - 1e-12) <= value <= high * (1 + 1e-12)


class TrainConfig(BaseModel):
    """Everything one experiment run needs."""

    model_config = ConfigDict(extra="forbid")

    dataset: DatasetConfig
    scorer: ScorerSpec = Field(default_factory=ScorerSpec)
    step1: Step1Config = Field(default_factory=Step1Config)
    step2: Step2Config = Field(default_factory=Step2Config)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    attacker: AttackerConfig = Field(default_factory=AttackerConfig)
    mode: ExperimentMode = "tfr_unsupervised"
    seed: int = 0
    output_dir: Path = Path("runs/default")
    allow_out_of_grid: bool = False

    @model_validator(mode="after")
    def sync_and_check(self) -> "TrainConfig":
        step2_mode = "supervised" if self.mode == "tfr_supervised" else "unsupervised"
        self.step1 = self.step1.model_copy(update={"seed": self.seed})
        self.step2 = self.step2.model_copy(update={"seed": self.seed, "mode": step2_mode})
        if not self.allow_out_of_grid:
            problems = self.grid_violations()
            if problems:
                raise ValueError("; ".join(problems) + " (set allow_out_of_grid = true to permit)")
        return self

    def grid_violations(self) -> list[str]:
        problems = []
        if not _in_grid(self.step1.lambda_a, LAMBDA_A_GRID):
            problems.append(f"step1.lambda_a={self.step1.lambda_a} not in {LAMBDA_A_GRID}")
        if not _in_grid(self.step1.l2, L2_GRID):
            problems.append(f"step1.l2={self.step1.l2} not in {L2_GRID}")
        if self.step2.lambda_d != 0.0 and not _in_range(self.step2.lambda_d, LAMBDA_D_RANGE):
            problems.append(f"step2.lambda_d={self.step2.lambda_d} outside {LAMBDA_D_RANGE}")
        if not _in_range(self.step2.disc_learning_rate, DISC_LR_RANGE):
            problems.append(f"step2.disc_learning_rate={self.step2.disc_learning_rate} outside {DISC_LR_RANGE}")
        if not _in_range(self.step2.disc_dropout, DISC_DROPOUT_RANGE):
            problems.append(f"step2.disc_dropout={self.step2.disc_dropout} outside {DISC_DROPOUT_RANGE}")
        return problems


def _strip_optional(annotation: Any) -> Any:
    if get_origin(annotation) in (Union, types.UnionType):
        args = [a for a in get_args(annotation) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return annotation


def _field_annotation(key: str) -> tuple[Any, bool] | None:
    """(annotation, optional) of a dotted key, or ``None`` if no such field exists."""
    model: type[BaseModel] = TrainConfig
    parts = key.split(".")
    for i, part in enumerate(parts):
        info = model.model_fields.get(part)
        if info is None:
            return None
        annotation = _strip_optional(info.annotation)
        if i == len(parts) - 1:
            return annotation, annotation is not info.annotation
        if not (isinstance(annotation, type) and issubclass(annotation, BaseModel)):
            return None
        model = annotation
    return None


def _convert(key: str, raw: str, annotation: Any, optional: bool, where: str) -> Any:
    origin = get_origin(annotation)
    if optional and raw.lower() in ("none", "null"):
        return None
    if origin is list:
        return [item.strip() for item in raw.split(",") if item.strip()]
    if origin is dict:
        table: dict[str, str] = {}
        for pair in (p.strip() for p in raw.split(",") if p.strip()):
            name, sep, value = pair.partition(":")
            if not sep:
                raise ConfigError(f"{where}: {key} expects name:value pairs, got {pair!r}")
            table[name.strip()] = value.strip()
        return table
    return raw


def _assign(tree: dict[str, Any], key: str, value: Any) -> None:
    *parents, leaf = key.split(".")
    node = tree
    for part in parents:
        node = node.setdefault(part, {})
    node[leaf] = value


def parse_assignments(lines: Iterable[tuple[str, str]]) -> dict[str, Any]:
    """Turn ``(where, "key = value")`` pairs into a nested dict of raw values."""
    tree: dict[str, Any] = {}
    seen: dict[str, str] = {}
    for where, line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"{where}: expected 'key = value', got {stripped!r}")
        found = _field_annotation(key)
        if found is None:
            raise ConfigError(f"{where}: unknown configuration key {key!r}")
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r} (first set at {seen[key]})")
        seen[key] = where
        _assign(tree, key, _convert(key, raw, *found, where))
    return tree


def _merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(
    path: Path | None = None,
    overrides: Sequence[str] = (),
    flags: Mapping[str, object] | None = None,
) -> TrainConfig:
    """Read a config file (optional), then apply ``key=value`` overrides and finally ``flags``.

    ``flags`` holds values of dedicated CLI options such as ``--seed``; entries
    set to ``None`` are ignored.
    """
    tree: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        tree = parse_assignments((f"{path}:{n}", line) for n, line in enumerate(text.splitlines(), start=1))
    if overrides:
        tree = _merge(tree, parse_assignments((f"--set {o}", o) for o in overrides))
    given = {key: value for key, value in (flags or {}).items() if value is not None}
    if given:
        assignments = ((f"--{key.replace('_', '-')}", f"{key}={value}") for key, value in given.items())
        tree = _merge(tree, parse_assignments(assignments))
    try:
        config = TrainConfig.model_validate(tree)
    except ValidationError as e:
        details = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid configuration: {details}") from e
    fingerprint = config_fingerprint(config)[:12]
    logger.debug(f"Loaded configuration (mode={config.mode}, seed={config.seed}, fingerprint={fingerprint})")
    return config


def _flatten(value: Any, prefix: str = "") -> Iterable[tuple[str, Any]]:
    if isinstance(value, dict) and not prefix.endswith("token_table"):
        for key in sorted(value):
            yield from _flatten(value[key], f"{prefix}.{key}" if prefix else key)
    else:
        yield prefix, value


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(_render(v) for v in value)
    if isinstance(value, dict):
        return ",".join(f"{k}:{v}" for k, v in sorted(value.items()))
    return str(value)


def format_config(config: TrainConfig) -> str:
    """The config as flat ``key = value`` text that ``load_config`` reads back."""
    data = config.model_dump(mode="json")
    lines = [f"{key} = {_render(value)}" for key, value in _flatten(data)]
    return "\n".join(lines) + "\n"


def config_fingerprint(config: TrainConfig) -> str:
    """SHA-256 of the canonical JSON form, ignoring the output directory."""
    payload = json.dumps(config.model_dump(mode="json", exclude={"output_dir"}), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
