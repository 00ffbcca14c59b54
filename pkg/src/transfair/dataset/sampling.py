"""
Negative item sampling.

``sample_negatives`` draws distinct negatives for one user (evaluation
candidates); ``NegativeSampler`` draws one negative per training example for a
whole epoch at once.
"""

from collections.abc import Iterable, Iterator
from typing import Protocol

import numpy as np

from ..errors import PoolExhaustedError


class ItemCatalog(Protocol):
    """Anything that knows the candidate items and each user's interactions."""

    n_items: int

    @property
    def catalog(self) -> np.ndarray: ...

    def known_items(self, user: int) -> np.ndarray: ...


def _generator(seed: int | np.random.Generator) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_negatives(
    source: ItemCatalog,
    user: int,
    k: int,
    exclude: Iterable[int] = (),
    seed: int | np.random.Generator = 0,
) -> np.ndarray:
    """Draw ``k`` distinct items the user never interacted with and not in ``exclude``."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    blocked = np.union1d(source.known_items(user), np.fromiter(exclude, dtype=np.int64))
    pool = np.setdiff1d(source.catalog, blocked)
    if k > pool.size:
        raise PoolExhaustedError(f"user {user}: asked for {k} negatives but only {pool.size} candidates remain")
    if k == 0:
        return np.empty(0, dtype=np.int64)
    return _generator(seed).choice(pool, size=k, replace=False).astype(np.int64)


class NegativeSampler:
    """Uniform training negatives over the catalog, rejecting known items.

    Every user passed at construction must have at least one candidate left;
    rejection sampling then always terminates.
    """

    def __init__(self, source: ItemCatalog, users: Iterable[int]):
        self.catalog = np.asarray(source.catalog, dtype=np.int64)
        self.n_items = int(source.n_items)
        codes = []
        for user in np.unique(np.fromiter(users, dtype=np.int64)):
            known = np.asarray(source.known_items(int(user)), dtype=np.int64)
            if np.setdiff1d(self.catalog, known).size == 0:
                raise PoolExhaustedError(f"user {user} has interacted with every catalog item")
            codes.append(int(user) * self.n_items + known)
        self._known = np.unique(np.concatenate(codes)) if codes else np.empty(0, dtype=np.int64)

    def _is_known(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        return np.isin(users * self.n_items + items, self._known)

    def sample(self, users: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One negative per entry of ``users``."""
        users = np.asarray(users, dtype=np.int64)
        items = self.catalog[rng.integers(0, self.catalog.size, size=users.size)]
        pending = np.flatnonzero(self._is_known(users, items))
        while pending.size:
            items[pending] = self.catalog[rng.integers(0, self.catalog.size, size=pending.size)]
            pending = pending[self._is_known(users[pending], items[pending])]
        return items


def minibatches(order: np.ndarray, size: int, min_size: int = 1) -> Iterator[np.ndarray]:
    """Consecutive chunks of ``order``; a tail shorter than ``min_size`` joins the previous chunk."""
    if order.size < min_size:
        raise PoolExhaustedError(f"need at least {min_size} training examples per batch, have {order.size}")
    bounds = list(range(0, order.size, size)) + [order.size]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] < min_size:
        bounds.pop(-2)
    for start, stop in zip(bounds[:-1], bounds[1:], strict=True):
        yield order[start:stop]
