"""
Diagnostics for the fairness-transfer argument.

Transfer of fairness rests on two conditions: fair source embeddings carry
no sensitive signal, and mapped target embeddings follow the same
distribution as the fair source embeddings. ``theorem_check`` measures both
with attackers and reports the sensitive-attribute AUC on the target side.
"""

from dataclasses import dataclass

import numpy as np
from loguru import logger

from ..errors import DegenerateSplitError, ShapeError
from ..evalkit.attacker import AttackerConfig, train_attacker


@dataclass(frozen=True)
class TheoremReport:
    source_sensitive_auc: float
    domain_auc: float
    target_sensitive_auc: float | None
    tolerance: float

    @property
    def source_is_fair(self) -> bool:
        return abs(self.source_sensitive_auc - 0.5) <= self.tolerance

    @property
    def domains_matched(self) -> bool:
        return abs(self.domain_auc - 0.5) <= self.tolerance

    @property
    def target_is_fair(self) -> bool | None:
        if self.target_sensitive_auc is None:
            return None
        return abs(self.target_sensitive_auc - 0.5) <= self.tolerance


def theorem_check(
    source_embeddings: np.ndarray,
    target_embeddings: np.ndarray,
    source_labels: np.ndarray,
    target_labels: np.ndarray | None,
    seed: int,
    *,
    tolerance: float = 0.05,
    config: AttackerConfig | None = None,
) -> TheoremReport:
    """Attacker AUCs for (i) A from f_A(r^S), (ii) source vs target, (iii) A from M(r^T)."""
    source = np.asarray(source_embeddings, dtype=np.float64)
    target = np.asarray(target_embeddings, dtype=np.float64)
    if source.ndim != 2 or target.ndim != 2 or source.shape[1] != target.shape[1]:
        raise ShapeError(f"source {source.shape} and target {target.shape} embeddings are not comparable")

    source_auc = train_attacker(source, source_labels, seed, config).auc
    stacked = np.vstack([source, target])
    origin = np.concatenate([np.ones(source.shape[0]), np.zeros(target.shape[0])])
    domain_auc = train_attacker(stacked, origin, seed, config).auc

    target_auc = None
    if target_labels is not None:
        try:
            target_auc = train_attacker(target, target_labels, seed, config).auc
        except DegenerateSplitError as e:
            logger.warning(f"Target sensitive attacker skipped: {e}")

    report = TheoremReport(source_auc, domain_auc, target_auc, tolerance)
    logger.info(
        f"Transfer diagnostics: source A-AUC={source_auc:.3f}, domain AUC={domain_auc:.3f}, "
        f"target A-AUC={'n/a' if target_auc is None else f'{target_auc:.3f}'}"
    )
    return report
