"""
Evaluation reports.

An ``EvalReport`` keeps the per-user metric values next to their means so two
reports over the same users can be compared with a paired test later.
Serialization is deterministic: keys sorted, floats written at full
precision.
"""

import json
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import CorruptArtifactError, ProtocolError
from .stats import TTestResult, paired_t_test

REPORT_SCHEMA = "transfair.report/v1"


def metric_name(metric: str, n: int) -> str:
    return f"{metric}@{n}"


class EvalReport(BaseModel):
    """Ranking metrics, attacker AUC and provenance of one evaluation."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_name: str = Field(default=REPORT_SCHEMA, alias="schema")
    role: str = "test"
    ns: list[int] = Field(default_factory=lambda: [5, 10])
    users: list[int] = Field(default_factory=list)
    metrics: dict[str, float] = Field(default_factory=dict)
    per_user: dict[str, list[float]] = Field(default_factory=dict)
    skipped_users: int = 0
    attacker_auc: float | None = None
    attacker_aucs: list[float] = Field(default_factory=list)
    attacker_seeds: list[int] = Field(default_factory=list)
    mode: str | None = None
    seed: int = 0
    config_fingerprint: str = ""
    build: str = ""

    @model_validator(mode="after")
    def check_means(self) -> "EvalReport":
        for name, values in self.per_user.items():
            if len(values) != len(self.users):
                raise ValueError(f"{name}: {len(values)} values for {len(self.users)} users")
            if name not in self.metrics:
                raise ValueError(f"{name}: per-user values without a mean")
            if values and abs(float(np.mean(values)) - self.metrics[name]) > 1e-12:
                raise ValueError(f"{name}: stored mean {self.metrics[name]} != mean of per-user values")
        return self

    @classmethod
    def from_per_user(cls, users: np.ndarray, per_user: dict[str, np.ndarray], **fields) -> "EvalReport":
        if len(users) == 0:
            raise ProtocolError("no evaluable users")
        return cls(
            users=[int(u) for u in users],
            metrics={name: float(np.mean(values)) for name, values in per_user.items()},
            per_user={name: [float(v) for v in values] for name, values in per_user.items()},
            **fields,
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(by_alias=True), indent=2, sort_keys=True) + "\n"

    def write(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: Path | str) -> "EvalReport":
        path = Path(path)
        try:
            return cls.model_validate(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError, ValueError) as e:
            raise CorruptArtifactError("report", f"{path}: {e}") from e


def compare_reports(a: EvalReport, b: EvalReport, metric: str = "ndcg@10", alpha: float = 0.05) -> TTestResult:
    """Paired t-test of ``a - b`` on ``metric`` over the users both reports share."""
    if metric not in a.per_user or metric not in b.per_user:
        raise ProtocolError(f"metric {metric!r} missing from one of the reports")
    values_b = dict(zip(b.users, b.per_user[metric], strict=True))
    shared = [(v, values_b[u]) for u, v in zip(a.users, a.per_user[metric], strict=True) if u in values_b]
    if len(shared) < 2:
        raise ProtocolError(f"reports share only {len(shared)} users")
    first, second = zip(*shared, strict=True)
    return paired_t_test(first, second, alpha)
