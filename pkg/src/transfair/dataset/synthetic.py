"""
Synthetic benchmarks with known structure.

``make_planted_dataset`` builds implicit feedback whose item preferences
depend on a binary sensitive label, so an unconstrained recommender leaks the
label into its user embeddings. ``two_gaussian_toy`` provides the two point
clouds used to check that adversarial distribution matching actually merges
distributions.
"""

import numpy as np
from loguru import logger

from ..numkit.rng import derive_rng
from .models import InteractionDataset


def make_planted_dataset(
    n_users: int = 1000,
    n_items: int = 500,
    seed: int = 0,
    *,
    latent_dim: int = 4,
    planted_strength: float = 1.5,
    min_interactions: int = 8,
    max_interactions: int = 40,
    temperature: float = 1.0,
) -> InteractionDataset:
    """Interactions drawn from a low-rank taste model plus a planted group preference.

    Items are split into two halves; users with label 1 prefer the first half
    and users with label 0 the second, by ``planted_strength`` logits. Each
    user draws between ``min_interactions`` and ``max_interactions`` distinct
    items with probabilities proportional to ``exp(score / temperature)``
    (Gumbel top-k sampling).
    """
    if max_interactions > n_items or min_interactions < 1 or min_interactions > max_interactions:
        raise ValueError("interaction counts must satisfy 1 <= min <= max <= n_items")
    rng = derive_rng(seed, "planted_dataset")
    labels = rng.integers(0, 2, size=n_users)
    user_taste = rng.standard_normal((n_users, latent_dim))
    item_taste = rng.standard_normal((n_items, latent_dim)) / np.sqrt(latent_dim)
    item_group = (np.arange(n_items) < n_items // 2).astype(np.float64)
    item_popularity = rng.normal(0.0, 0.5, size=n_items)

    planted = planted_strength * np.outer(2.0 * labels - 1.0, 2.0 * item_group - 1.0)
    scores = user_taste @ item_taste.T + planted + item_popularity
    keys = scores / temperature + rng.gumbel(size=scores.shape)
    counts = rng.integers(min_interactions, max_interactions + 1, size=n_users)

    users: list[np.ndarray] = []
    items: list[np.ndarray] = []
    for user in range(n_users):
        top = np.argpartition(-keys[user], counts[user] - 1)[: counts[user]]
        users.append(np.full(top.size, user, dtype=np.int64))
        items.append(top.astype(np.int64))

    ds = InteractionDataset(
        user_ids=tuple(f"u{u}" for u in range(n_users)),
        item_ids=tuple(f"i{i}" for i in range(n_items)),
        users=np.concatenate(users),
        items=np.concatenate(items),
        sensitive=labels.astype(np.int64),
    )
    logger.debug(f"Planted dataset (seed={seed}): {n_users} users, {n_items} items, {ds.n_interactions} interactions")
    return ds


def two_gaussian_toy(
    n_source: int,
    n_target: int,
    dim: int = 2,
    shift: float = 2.0,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Source points from N(shift, I) and target seeds from N(0, I)."""
    rng = derive_rng(seed, "two_gaussian_toy")
    source = rng.standard_normal((n_source, dim)) + shift
    target = rng.standard_normal((n_target, dim))
    return source, target
