"""
recmodels - PMF, BiasedMF, DMF and MLP recommenders over injected user vectors.
"""

from .models import ModelState, ParameterGroup, ScorerKind, ScorerSpec, init_model
from .scoring import (
    batch_l2_penalty,
    bpr_batch_loss,
    bpr_loss,
    l2_penalty,
    rank_items,
    score,
    score_batch,
    score_candidates,
    topn_recommend,
)

__all__ = [
    "ModelState",
    "ParameterGroup",
    "ScorerKind",
    "ScorerSpec",
    "batch_l2_penalty",
    "bpr_batch_loss",
    "bpr_loss",
    "init_model",
    "l2_penalty",
    "rank_items",
    "score",
    "score_batch",
    "score_candidates",
    "topn_recommend",
]
