"""
Sampled top-N evaluation: NDCG@N and Hit@N over 101-item candidate lists.
"""

from collections.abc import Sequence

import numpy as np
from loguru import logger

from ..dataset.models import DomainSplit, Role
from ..errors import ProtocolError, ShapeError
from ..recmodels.models import ModelState
from ..recmodels.scoring import score_candidates
from .candidates import DEFAULT_NEGATIVES, CandidateSet, build_candidates
from .metrics import candidate_ranks, hit_from_ranks, ndcg_from_ranks
from .report import EvalReport, metric_name

DEFAULT_NS: tuple[int, ...] = (5, 10)


def evaluate_scores(
    candidates: CandidateSet,
    scores: np.ndarray,
    ns: Sequence[int] = DEFAULT_NS,
    **fields,
) -> EvalReport:
    """Metrics from a (users x candidates) score matrix aligned with ``candidates.items``."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != candidates.items.shape:
        raise ShapeError(f"scores {scores.shape} do not match candidates {candidates.items.shape}")
    ranks = candidate_ranks(scores, candidates.items)
    per_user: dict[str, np.ndarray] = {}
    for n in ns:
        per_user[metric_name("ndcg", n)] = ndcg_from_ranks(ranks, n)
        per_user[metric_name("hit", n)] = hit_from_ranks(ranks, n)
    return EvalReport.from_per_user(
        candidates.users,
        per_user,
        role=candidates.role,
        ns=list(ns),
        skipped_users=len(candidates.skipped),
        **fields,
    )


def evaluate_ranking(
    model: ModelState,
    user_vectors: np.ndarray,
    split: DomainSplit,
    users: np.ndarray,
    role: Role = "test",
    seed: int = 0,
    ns: Sequence[int] = DEFAULT_NS,
    *,
    n_negatives: int = DEFAULT_NEGATIVES,
    candidates: CandidateSet | None = None,
) -> EvalReport:
    """Rank each user's candidates with the supplied user vectors.

    ``user_vectors`` row ``r`` is the embedding used for ``users[r]``: the
    filtered embedding for source users, the mapped embedding for target
    users, or a raw embedding for the baselines. Users without a held-out item
    for ``role`` are skipped and counted in the report.
    """
    users = np.asarray(users, dtype=np.int64)
    user_vectors = np.asarray(user_vectors, dtype=np.float64)
    if user_vectors.shape[0] != users.size:
        raise ShapeError(f"{user_vectors.shape[0]} user vectors for {users.size} users")
    if candidates is None:
        candidates = build_candidates(split, users, role, seed, n_negatives)
    if len(candidates) == 0:
        raise ProtocolError(f"none of the {users.size} users has a {role} item")

    row_of = {int(u): r for r, u in enumerate(users)}
    rows = np.asarray([row_of[int(u)] for u in candidates.users], dtype=np.int64)
    scores = score_candidates(model, user_vectors[rows], candidates.items, candidates.users)
    report = evaluate_scores(candidates, scores, ns, seed=seed)
    summary = ", ".join(f"{k}={v:.4f}" for k, v in sorted(report.metrics.items()))
    logger.debug(f"Evaluated {len(candidates)} users on {role} ({len(candidates.skipped)} skipped): {summary}")
    return report
