"""
evalkit - ranking metrics, the sensitive-attribute attacker and significance tests.
"""

from .attacker import AttackerConfig, AttackerResult, AttackSummary, attack_embeddings, train_attacker
from .candidates import DEFAULT_NEGATIVES, CandidateList, CandidateSet, build_candidates
from .metrics import (
    auc_score,
    candidate_ranks,
    hit_at_n,
    hit_from_ranks,
    ndcg_at_n,
    ndcg_from_ranks,
    positive_rank,
)
from .ranking import DEFAULT_NS, evaluate_ranking, evaluate_scores
from .report import REPORT_SCHEMA, EvalReport, compare_reports, metric_name
from .stats import TTestResult, paired_t_test

__all__ = [
    "DEFAULT_NEGATIVES",
    "DEFAULT_NS",
    "REPORT_SCHEMA",
    "AttackSummary",
    "AttackerConfig",
    "AttackerResult",
    "CandidateList",
    "CandidateSet",
    "EvalReport",
    "TTestResult",
    "attack_embeddings",
    "auc_score",
    "build_candidates",
    "candidate_ranks",
    "compare_reports",
    "evaluate_ranking",
    "evaluate_scores",
    "hit_at_n",
    "hit_from_ranks",
    "metric_name",
    "ndcg_at_n",
    "ndcg_from_ranks",
    "paired_t_test",
    "positive_rank",
    "train_attacker",
]
