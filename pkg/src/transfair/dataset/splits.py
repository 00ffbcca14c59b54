"""
Cold-start partition and leave-one-out holdout.
"""

import numpy as np
from loguru import logger

from ..errors import ConfigError, EmptyDatasetError
from ..numkit.rng import derive_rng
from .models import DomainSplit, InteractionDataset, UserAssignment


def cold_start_split(
    ds: InteractionDataset,
    target_fraction: float = 0.2,
    max_keep: int = 5,
    seed: int = 0,
) -> DomainSplit:
    """Partition users into warm source users and cold-start target users.

    ``floor(n * target_fraction)`` users become targets. Each target keeps a
    random subset of at most ``max_keep`` interactions; afterwards, items no
    source user interacted with are removed from the catalog together with the
    target interactions that referenced them. Targets left without any
    interaction are dropped.
    """
    if not 0.0 < target_fraction < 1.0:
        raise ConfigError(f"target_fraction must lie in (0, 1), got {target_fraction}")
    if max_keep < 1:
        raise ConfigError(f"max_keep must be at least 1, got {max_keep}")
    if ds.n_interactions == 0:
        raise EmptyDatasetError("cannot split an empty dataset")

    rng = derive_rng(seed, "cold_start_split")
    n_target = int(np.floor(ds.n_users * target_fraction + 1e-9))
    is_target = np.zeros(ds.n_users, dtype=bool)
    is_target[rng.choice(ds.n_users, size=n_target, replace=False)] = True
    source_users = np.flatnonzero(~is_target)
    candidates = np.flatnonzero(is_target)

    kept: dict[int, np.ndarray] = {}
    for user in candidates:
        items = ds.items_of(int(user))
        if items.size > max_keep:
            items = np.sort(rng.choice(items, size=max_keep, replace=False))
        kept[int(user)] = items

    source_mask = ~is_target[ds.users]
    catalog = np.unique(ds.items[source_mask])

    assignments: dict[int, UserAssignment] = {
        int(u): UserAssignment(train=tuple(int(i) for i in ds.items_of(int(u)))) for u in source_users
    }
    hidden: dict[int, tuple[int, ...]] = {}
    targets: list[int] = []
    dropped: list[int] = []
    cold_removed = 0
    for user, items in kept.items():
        warm = items[np.isin(items, catalog)]
        cold_removed += items.size - warm.size
        if warm.size == 0:
            dropped.append(user)
            logger.warning(f"Dropping target user {ds.user_ids[user]}: no interactions left after cold-item removal")
            continue
        targets.append(user)
        assignments[user] = UserAssignment(train=tuple(int(i) for i in warm))
        hidden[user] = tuple(int(i) for i in np.setdiff1d(ds.items_of(user), warm))

    logger.info(
        f"Cold-start split (seed={seed}): {source_users.size} source users, {len(targets)} target users, "
        f"{len(dropped)} dropped, {catalog.size} items kept, {cold_removed} target interactions on cold items removed"
    )
    return DomainSplit(
        n_users=ds.n_users,
        n_items=ds.n_items,
        seed=seed,
        source_users=source_users.astype(np.int64),
        target_users=np.asarray(targets, dtype=np.int64),
        assignments=assignments,
        catalog=catalog.astype(np.int64),
        hidden=hidden,
        sensitive=ds.sensitive,
        dropped_users=tuple(dropped),
    )


def leave_one_out(split: DomainSplit, seed: int) -> DomainSplit:
    """Hold out one validation and one test item per user.

    Users with three or more interactions get a validation item, a test item
    and the rest as training items; users with exactly two get a test item and
    one training item; single-interaction users keep their item for training
    and are excluded from ranking evaluation.
    """
    rng = derive_rng(seed, "leave_one_out")
    assignments: dict[int, UserAssignment] = {}
    counts = {"full": 0, "test_only": 0, "train_only": 0}
    for user in sorted(split.assignments):
        items = np.asarray(split.interactions(user), dtype=np.int64)
        if items.size >= 3:
            shuffled = rng.permutation(items)
            assignments[user] = UserAssignment(
                train=tuple(sorted(int(i) for i in shuffled[2:])), val=int(shuffled[0]), test=int(shuffled[1])
            )
            counts["full"] += 1
        elif items.size == 2:
            shuffled = rng.permutation(items)
            assignments[user] = UserAssignment(train=(int(shuffled[1]),), test=int(shuffled[0]))
            counts["test_only"] += 1
        else:
            assignments[user] = UserAssignment(train=tuple(int(i) for i in items))
            counts["train_only"] += 1

    logger.debug(
        f"Leave-one-out (seed={seed}): {counts['full']} users with val+test, "
        f"{counts['test_only']} with test only, {counts['train_only']} excluded from evaluation"
    )
    return DomainSplit(
        n_users=split.n_users,
        n_items=split.n_items,
        seed=split.seed,
        source_users=split.source_users,
        target_users=split.target_users,
        assignments=assignments,
        catalog=split.catalog,
        hidden=split.hidden,
        sensitive=split.sensitive,
        dropped_users=split.dropped_users,
        held_out=True,
    )
