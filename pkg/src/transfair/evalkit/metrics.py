"""
Ranking metrics for a single relevant item, and AUC.
"""

from collections.abc import Sequence

import numpy as np
from scipy.stats import rankdata

from ..errors import ProtocolError, UndefinedMetricError


def positive_rank(ranked: Sequence[int] | np.ndarray, positive: int) -> int:
    """1-based position of ``positive`` in a ranked candidate list."""
    matches = np.flatnonzero(np.asarray(ranked) == positive)
    if matches.size == 0:
        raise ProtocolError(f"positive item {positive} is not in the candidate list")
    return int(matches[0]) + 1


def ndcg_at_n(ranked: Sequence[int] | np.ndarray, positive: int, n: int) -> float:
    """1 / log2(rank + 1) when the positive is within the top ``n``, else 0."""
    rank = positive_rank(ranked, positive)
    return float(1.0 / np.log2(rank + 1)) if rank <= n else 0.0


def hit_at_n(ranked: Sequence[int] | np.ndarray, positive: int, n: int) -> int:
    return int(positive_rank(ranked, positive) <= n)


def candidate_ranks(scores: np.ndarray, items: np.ndarray) -> np.ndarray:
    """Rank of the positive (column 0) within each row of a candidate matrix.

    Consistent with ``rank_items``: candidates scoring higher, and candidates
    tying with a smaller item index, come first.
    """
    scores = np.asarray(scores, dtype=np.float64)
    items = np.asarray(items, dtype=np.int64)
    positive_scores = scores[:, :1]
    higher = (scores[:, 1:] > positive_scores).sum(axis=1)
    tied_before = ((scores[:, 1:] == positive_scores) & (items[:, 1:] < items[:, :1])).sum(axis=1)
    return 1 + higher + tied_before


def ndcg_from_ranks(ranks: np.ndarray, n: int) -> np.ndarray:
    ranks = np.asarray(ranks, dtype=np.float64)
    return np.where(ranks <= n, 1.0 / np.log2(ranks + 1.0), 0.0)


def hit_from_ranks(ranks: np.ndarray, n: int) -> np.ndarray:
    return (np.asarray(ranks) <= n).astype(np.float64)


def auc_score(scores: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray) -> float:
    """Probability that a random positive outscores a random negative (ties count 1/2)."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores for {labels.size} labels")
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes")
    ranks = rankdata(scores, method="average")
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
