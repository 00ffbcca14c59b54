"""
Preference scores, BPR loss, L2 regularization and top-N ranking.

All scoring takes the user vector from the caller: raw ``r_u`` for base
models, the filtered embedding for fair source users, the mapped embedding for
target users. Item-side parameters always come from the model.
"""

from collections.abc import Sequence

import numpy as np

from ..errors import EmptyCandidatesError, ProtocolError, ShapeError
from ..numkit import ops
from ..numkit.tape import Tensor
from .models import ModelState


def score_batch(
    model: ModelState,
    user_vecs: Tensor,
    items: np.ndarray,
    users: np.ndarray | None = None,
) -> Tensor:
    """Scores S_uv for matching rows of ``user_vecs`` and ``items``, shape (batch, 1).

    ``users`` supplies the rows of the BiasedMF user-bias table; without it
    the user bias is left out, which does not change any per-user ranking.
    """
    items = np.asarray(items, dtype=np.int64).reshape(-1)
    if user_vecs.cols != model.dim:
        raise ShapeError(f"user vectors have {user_vecs.cols} columns, model dim is {model.dim}")
    if user_vecs.rows != items.size:
        raise ShapeError(f"{user_vecs.rows} user vectors for {items.size} items")
    item_vecs = ops.gather_rows(model.item_embeddings, items)

    if model.kind == "pmf":
        return ops.rowwise_dot(user_vecs, item_vecs)
    if model.kind == "biasedmf":
        assert model.item_bias is not None and model.global_bias is not None
        scores = ops.add(ops.rowwise_dot(user_vecs, item_vecs), ops.gather_rows(model.item_bias, items))
        scores = ops.add(scores, model.global_bias)
        if users is not None and model.user_bias is not None:
            scores = ops.add(scores, ops.gather_rows(model.user_bias, users))
        return scores
    if model.kind == "dmf":
        assert model.user_tower is not None and model.item_tower is not None
        return ops.rowwise_dot(model.user_tower(user_vecs), model.item_tower(item_vecs))
    assert model.matcher is not None
    return model.matcher(ops.concat_cols([user_vecs, item_vecs]))


def score(model: ModelState, user_vec: np.ndarray, item: int, user: int | None = None) -> float:
    """S_uv for a single user vector and item."""
    users = None if user is None else np.asarray([user])
    return score_batch(model, Tensor(np.asarray(user_vec).reshape(1, -1)), np.asarray([item]), users).item()


def score_candidates(
    model: ModelState,
    user_vecs: np.ndarray,
    candidates: np.ndarray,
    users: np.ndarray | None = None,
) -> np.ndarray:
    """Score every candidate of every user: (U, d) vectors x (U, C) items -> (U, C)."""
    user_vecs = np.asarray(user_vecs, dtype=np.float64)
    candidates = np.asarray(candidates, dtype=np.int64)
    n_users, n_candidates = candidates.shape
    if n_users == 0 or n_candidates == 0:
        return np.zeros((n_users, n_candidates))
    repeated = Tensor(np.repeat(user_vecs, n_candidates, axis=0))
    repeated_users = None if users is None else np.repeat(np.asarray(users, dtype=np.int64), n_candidates)
    flat = score_batch(model, repeated, candidates.reshape(-1), repeated_users)
    return flat.value.reshape(n_users, n_candidates)


def bpr_batch_loss(
    model: ModelState,
    user_vecs: Tensor,
    pos_items: np.ndarray,
    neg_items: np.ndarray,
    users: np.ndarray | None = None,
) -> Tensor:
    """Mean over the batch of -ln sigma(S_pos - S_neg)."""
    pos_items = np.asarray(pos_items, dtype=np.int64).reshape(-1)
    neg_items = np.asarray(neg_items, dtype=np.int64).reshape(-1)
    if np.any(pos_items == neg_items):
        raise ProtocolError("a BPR pair uses the same item as positive and negative")
    positive = score_batch(model, user_vecs, pos_items, users)
    negative = score_batch(model, user_vecs, neg_items, users)
    return ops.mean_all(ops.softplus(ops.sub(negative, positive)))


def bpr_loss(model: ModelState, user_vec: Tensor, pos_item: int, neg_item: int, user: int | None = None) -> Tensor:
    """-ln sigma(S_u,pos - S_u,neg) for one user vector."""
    users = None if user is None else np.asarray([user])
    return bpr_batch_loss(model, user_vec, np.asarray([pos_item]), np.asarray([neg_item]), users)


def l2_penalty(params: ModelState | Sequence[Tensor], coefficient: float) -> Tensor:
    """coefficient x sum of squared entries of every trainable parameter."""
    tensors = params.parameters() if isinstance(params, ModelState) else [p for p in params if p.trainable]
    if coefficient == 0.0 or not tensors:
        return ops.constant(0.0)
    total = ops.square_sum(tensors[0])
    for tensor in tensors[1:]:
        total = ops.add(total, ops.square_sum(tensor))
    return ops.scale(total, coefficient)


def batch_l2_penalty(
    model: ModelState,
    users: np.ndarray,
    items: np.ndarray,
    coefficient: float,
    extra: Sequence[Tensor] = (),
) -> Tensor:
    """L2 on the embedding and bias rows a batch touches plus every trainable network tensor.

    Each touched row counts once; rows the batch never reads are left alone.
    """
    if coefficient == 0.0:
        return ops.constant(0.0)
    user_rows = np.unique(np.asarray(users, dtype=np.int64))
    item_rows = np.unique(np.asarray(items, dtype=np.int64))
    terms: list[Tensor] = []
    for table, rows in (
        (model.user_embeddings, user_rows),
        (model.user_bias, user_rows),
        (model.item_embeddings, item_rows),
        (model.item_bias, item_rows),
    ):
        if table is not None and table.trainable:
            terms.append(ops.gather_rows(table, rows))
    terms += [t for t in model.network_parameters() if t.trainable]
    terms += [t for t in extra if t.trainable]
    if not terms:
        return ops.constant(0.0)
    total = ops.square_sum(terms[0])
    for tensor in terms[1:]:
        total = ops.add(total, ops.square_sum(tensor))
    return ops.scale(total, coefficient)


def rank_items(scores: np.ndarray, items: np.ndarray) -> np.ndarray:
    """Items ordered by descending score, ties by ascending item index."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    items = np.asarray(items, dtype=np.int64).reshape(-1)
    return items[np.lexsort((items, -scores))]


def topn_recommend(
    model: ModelState,
    user_vec: np.ndarray,
    candidates: Sequence[int] | np.ndarray,
    n: int,
    user: int | None = None,
) -> list[int]:
    """The top-``n`` candidates for one user vector."""
    items = np.asarray(candidates, dtype=np.int64).reshape(-1)
    if items.size == 0:
        raise EmptyCandidatesError("cannot rank an empty candidate list")
    if not 0 <= n <= items.size:
        raise ProtocolError(f"asked for top-{n} of {items.size} candidates")
    users = None if user is None else np.asarray([user])
    scores = score_candidates(model, np.asarray(user_vec).reshape(1, -1), items.reshape(1, -1), users)[0]
    return [int(i) for i in rank_items(scores, items)[:n]]
