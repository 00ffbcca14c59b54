"""
Sampled candidate lists: one held-out positive plus sampled negatives per user.
"""

from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
from loguru import logger

from ..dataset.models import DomainSplit, Role
from ..dataset.sampling import sample_negatives
from ..numkit.rng import derive_rng

DEFAULT_NEGATIVES = 100


@dataclass(frozen=True)
class CandidateList:
    user: int
    positive: int
    negatives: tuple[int, ...]
    role: Role

    @property
    def items(self) -> tuple[int, ...]:
        return (self.positive, *self.negatives)


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Candidate lists of many users as a matrix whose column 0 is the positive."""

    role: Role
    users: np.ndarray
    items: np.ndarray
    skipped: tuple[int, ...] = ()

    def __len__(self) -> int:
        return int(self.users.size)

    def __getitem__(self, index: int) -> CandidateList:
        row = self.items[index]
        return CandidateList(int(self.users[index]), int(row[0]), tuple(int(i) for i in row[1:]), self.role)

    def __iter__(self) -> Iterator[CandidateList]:
        return (self[i] for i in range(len(self)))


def build_candidates(
    split: DomainSplit,
    users: np.ndarray,
    role: Role,
    seed: int,
    n_negatives: int = DEFAULT_NEGATIVES,
) -> CandidateSet:
    """One candidate list per user that has a held-out item for ``role``.

    Negatives are drawn from the split catalog, never from anything the user
    interacted with, using a stream keyed by (seed, role, user) so validation
    and test lists differ and each list is independent of the others.
    """
    kept: list[int] = []
    rows: list[np.ndarray] = []
    skipped: list[int] = []
    for user in np.asarray(users, dtype=np.int64):
        positive = split.held_out_item(int(user), role)
        if positive is None:
            skipped.append(int(user))
            continue
        rng = derive_rng(seed, "candidates", role, int(user))
        negatives = sample_negatives(split, int(user), n_negatives, seed=rng)
        kept.append(int(user))
        rows.append(np.concatenate([[positive], negatives]).astype(np.int64))
    if skipped:
        logger.debug(f"{len(skipped)} users have no {role} item and are left out of evaluation")
    items = np.vstack(rows) if rows else np.empty((0, n_negatives + 1), dtype=np.int64)
    return CandidateSet(role, np.asarray(kept, dtype=np.int64), items, tuple(skipped))
