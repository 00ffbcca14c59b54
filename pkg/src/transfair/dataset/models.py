"""
Data models for implicit-feedback datasets and cold-start splits.

Users and items are addressed by dense integer indices everywhere inside the
package; the external ids read from input files are kept alongside so split
files and reports can be written back in the source's own vocabulary.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from loguru import logger

from ..errors import DomainError, ProtocolError, ShapeError

Domain = Literal["S", "T"]
Role = Literal["train", "val", "test"]

ROLES: tuple[Role, ...] = ("train", "val", "test")
DOMAINS: tuple[Domain, ...] = ("S", "T")


@dataclass(frozen=True, eq=False)
class InteractionDataset:
    """The 1-entries of the user x item interaction matrix plus user attributes.

    Interactions are stored as two parallel index arrays sorted by user and
    then item. ``sensitive`` holds one binary label per user once attributes
    have been attached.
    """

    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    users: np.ndarray
    items: np.ndarray
    sensitive: np.ndarray | None = None

    def __post_init__(self) -> None:
        users = np.asarray(self.users, dtype=np.int64)
        items = np.asarray(self.items, dtype=np.int64)
        if users.shape != items.shape or users.ndim != 1:
            raise ShapeError(f"interaction arrays must be 1-D and equal length, got {users.shape} and {items.shape}")
        if users.size:
            if users.min() < 0 or users.max() >= self.n_users:
                raise ShapeError("user index outside [0, n_users)")
            if items.min() < 0 or items.max() >= self.n_items:
                raise ShapeError("item index outside [0, n_items)")
        order = np.lexsort((items, users))
        users, items = users[order], items[order]
        if users.size > 1:
            same = (users[1:] == users[:-1]) & (items[1:] == items[:-1])
            if same.any():
                raise ShapeError("duplicate (user, item) pairs")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        if self.sensitive is not None:
            sensitive = np.asarray(self.sensitive, dtype=np.int64)
            if sensitive.shape != (self.n_users,):
                raise ShapeError(f"expected {self.n_users} sensitive labels, got {sensitive.shape}")
            if not np.isin(sensitive, (0, 1)).all():
                raise ShapeError("sensitive labels must be 0 or 1")
            object.__setattr__(self, "sensitive", sensitive)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_interactions(self) -> int:
        return int(self.users.size)

    @cached_property
    def _offsets(self) -> np.ndarray:
        return np.searchsorted(self.users, np.arange(self.n_users + 1))

    def items_of(self, user: int) -> np.ndarray:
        """Sorted item indices the user interacted with."""
        start, stop = self._offsets[user], self._offsets[user + 1]
        return self.items[start:stop]

    # ItemCatalog protocol

    @cached_property
    def catalog(self) -> np.ndarray:
        return np.arange(self.n_items, dtype=np.int64)

    def known_items(self, user: int) -> np.ndarray:
        return self.items_of(user)

    def with_sensitive(self, sensitive: np.ndarray) -> "InteractionDataset":
        return InteractionDataset(self.user_ids, self.item_ids, self.users, self.items, sensitive)


@dataclass(frozen=True)
class DatasetStats:
    n_users: int
    n_items: int
    n_interactions: int
    sparsity: float


def dataset_stats(ds: InteractionDataset) -> DatasetStats:
    """User/item/interaction counts and sparsity ``1 - interactions / (n * m)``."""
    cells = ds.n_users * ds.n_items
    sparsity = 1.0 - ds.n_interactions / cells if cells else 0.0
    return DatasetStats(ds.n_users, ds.n_items, ds.n_interactions, sparsity)


@dataclass(frozen=True)
class UserAssignment:
    """Train/validation/test items of one retained user."""

    train: tuple[int, ...]
    val: int | None = None
    test: int | None = None

    @property
    def items(self) -> tuple[int, ...]:
        held = tuple(i for i in (self.val, self.test) if i is not None)
        return tuple(sorted(self.train + held))

    def held_out(self, role: Role) -> int | None:
        if role == "val":
            return self.val
        if role == "test":
            return self.test
        raise ValueError(f"no held-out item for role {role!r}")


@dataclass(frozen=True, eq=False)
class DomainSplit:
    """Disjoint source/target partition with per-user item assignments.

    ``hidden`` lists, per target user, the interactions removed by truncation
    or cold-item removal; they are never trained on or evaluated but remain
    excluded from negative sampling. ``catalog`` is the set of items that
    survived the split. Reads of interaction data through ``pairs`` and
    ``held_out_item`` are recorded in ``accessed`` as ``(domain, role)``.
    """

    n_users: int
    n_items: int
    seed: int
    source_users: np.ndarray
    target_users: np.ndarray
    assignments: dict[int, UserAssignment]
    catalog: np.ndarray
    hidden: dict[int, tuple[int, ...]] = field(default_factory=dict)
    sensitive: np.ndarray | None = None
    dropped_users: tuple[int, ...] = ()
    held_out: bool = False
    accessed: set[tuple[str, str]] = field(default_factory=set, compare=False, repr=False)

    @cached_property
    def _domain_of(self) -> dict[int, Domain]:
        lookup: dict[int, Domain] = {int(u): "S" for u in self.source_users}
        lookup.update({int(u): "T" for u in self.target_users})
        return lookup

    def users(self, domain: Domain) -> np.ndarray:
        return self.source_users if domain == "S" else self.target_users

    def domain_of(self, user: int) -> Domain:
        try:
            return self._domain_of[int(user)]
        except KeyError:
            raise DomainError(f"user {user} is not part of the split") from None

    def require_domain(self, users: np.ndarray, domain: Domain) -> None:
        """Raise ``DomainError`` unless every user belongs to ``domain``."""
        members = self.users(domain)
        outside = np.setdiff1d(np.asarray(users, dtype=np.int64), members)
        if outside.size:
            preview = ", ".join(str(u) for u in outside[:10])
            raise DomainError(f"{outside.size} users are not in domain {domain}: {preview}")

    def _log_access(self, domain: str, role: str) -> None:
        if (domain, role) not in self.accessed:
            logger.trace(f"split access: domain={domain} role={role}")
        self.accessed.add((domain, role))

    def interactions(self, user: int) -> tuple[int, ...]:
        """All retained items of a user, whatever their role."""
        return self.assignments[int(user)].items

    def pairs(self, domain: Domain, role: Role) -> tuple[np.ndarray, np.ndarray]:
        """(users, items) arrays of every assignment with the given role."""
        self._log_access(domain, role)
        users: list[int] = []
        items: list[int] = []
        for user in self.users(domain):
            assignment = self.assignments[int(user)]
            if role == "train":
                users.extend([int(user)] * len(assignment.train))
                items.extend(assignment.train)
            else:
                item = assignment.held_out(role)
                if item is not None:
                    users.append(int(user))
                    items.append(item)
        return np.asarray(users, dtype=np.int64), np.asarray(items, dtype=np.int64)

    def held_out_item(self, user: int, role: Role) -> int | None:
        self._log_access(self.domain_of(user), role)
        return self.assignments[int(user)].held_out(role)

    def evaluable_users(self, domain: Domain, role: Role) -> np.ndarray:
        """Users of ``domain`` that have a held-out item for ``role``."""
        if not self.held_out:
            raise ProtocolError("split has no held-out items; run leave_one_out first")
        return np.asarray(
            [u for u in self.users(domain) if self.assignments[int(u)].held_out(role) is not None], dtype=np.int64
        )

    # ItemCatalog protocol

    def known_items(self, user: int) -> np.ndarray:
        """Every item the user interacted with in the original data."""
        self._log_access(self.domain_of(user), "exclude")
        known = self.interactions(user) + self.hidden.get(int(user), ())
        return np.asarray(sorted(known), dtype=np.int64)

    def labels(self, users: np.ndarray) -> np.ndarray:
        if self.sensitive is None:
            raise ProtocolError("split carries no sensitive labels")
        return self.sensitive[np.asarray(users, dtype=np.int64)]
