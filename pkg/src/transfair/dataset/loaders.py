"""
Readers for interaction and attribute files.

Two interaction layouts are understood: MovieLens-1M ``ratings.dat``
(``UserID::MovieID::Rating::Timestamp``) and a generic tab-separated
``user<TAB>item<TAB>value`` file, which is how Last.FM-style listening data
comes in. Every observed pair becomes an implicit positive regardless of its
rating or count.
"""

from collections.abc import Mapping
from pathlib import Path
from typing import Literal

import numpy as np
from loguru import logger

from ..errors import CoverageError, DataError, DataFormatError, EmptyDatasetError
from ..numkit.rng import derive_rng
from .models import InteractionDataset

InteractionFormat = Literal["ml1m", "tsv"]
SensitiveFormat = Literal["ml1m_users", "tsv"]
IndexSpace = Literal["dense", "max_id"]

# Gender tokens of the MovieLens users file; F is the protected value.
DEFAULT_TOKEN_TABLE: dict[str, int] = {"F": 1, "M": 0, "1": 1, "0": 0}


def _read_lines(path: Path, encoding: str):
    try:
        with path.open(encoding=encoding) as handle:
            for number, raw in enumerate(handle, start=1):
                line = raw.rstrip("\r\n")
                if line.strip():
                    yield number, line
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read {path}: {e}") from e


def _parse_record(path: Path, number: int, line: str, format: InteractionFormat) -> tuple[str, str]:
    if format == "ml1m":
        fields = line.split("::")
        expected = 4
    else:
        fields = line.split("\t")
        expected = 3
    if len(fields) != expected:
        raise DataFormatError(path, number, f"expected {expected} fields, found {len(fields)}")
    user, item, value = (f.strip() for f in fields[:3])
    if not user or not item:
        raise DataFormatError(path, number, "empty user or item id")
    try:
        float(value)
    except ValueError:
        raise DataFormatError(path, number, f"value {value!r} is not a number") from None
    return user, item


def load_interactions(
    path: Path | str,
    format: InteractionFormat = "ml1m",
    *,
    index_space: IndexSpace = "dense",
    header: bool = False,
) -> InteractionDataset:
    """Load an interaction file as implicit feedback.

    Args:
        path: ratings/interactions file
        format: ``ml1m`` or ``tsv``
        index_space: ``dense`` assigns item indices in first-appearance order;
            ``max_id`` requires positive integer item ids and sizes the item
            space by the largest id (id ``k`` becomes index ``k - 1``)
        header: skip the first non-empty line of a tsv file

    Returns:
        The dataset, without sensitive labels.
    """
    path = Path(path)
    logger.debug(f"Loading interactions from {path} (format={format}, index_space={index_space})")
    encoding = "latin-1" if format == "ml1m" else "utf-8"

    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    max_item = 0
    users: list[int] = []
    items: list[int] = []
    pairs: set[tuple[int, int]] = set()
    raw_lines = 0
    skip_header = header and format == "tsv"

    for number, line in _read_lines(path, encoding):
        if skip_header:
            skip_header = False
            continue
        raw_lines += 1
        user, item = _parse_record(path, number, line, format)
        u = user_index.setdefault(user, len(user_index))
        if index_space == "max_id":
            try:
                item_number = int(item)
            except ValueError:
                raise DataFormatError(path, number, f"item id {item!r} is not an integer") from None
            if item_number < 1:
                raise DataFormatError(path, number, f"item id {item_number} must be positive")
            max_item = max(max_item, item_number)
            i = item_number - 1
        else:
            i = item_index.setdefault(item, len(item_index))
        if (u, i) not in pairs:
            pairs.add((u, i))
            users.append(u)
            items.append(i)

    if not users:
        raise EmptyDatasetError(f"{path} contains no interactions")

    item_ids = tuple(str(k) for k in range(1, max_item + 1)) if index_space == "max_id" else tuple(item_index)
    ds = InteractionDataset(
        user_ids=tuple(user_index),
        item_ids=item_ids,
        users=np.asarray(users, dtype=np.int64),
        items=np.asarray(items, dtype=np.int64),
    )
    logger.info(
        f"Loaded {raw_lines} lines from {path.name}: {ds.n_users} users, {ds.n_items} items, "
        f"{ds.n_interactions} interactions"
    )
    return ds


def load_sensitive(
    path: Path | str,
    format: SensitiveFormat = "ml1m_users",
    *,
    token_table: Mapping[str, int] | None = None,
    header: bool = False,
) -> dict[str, int]:
    """Read one binary sensitive label per external user id.

    ``ml1m_users`` lines look like ``UserID::Gender::Age::Occupation::Zip``;
    ``tsv`` lines are ``user<TAB>token``. Tokens are looked up in
    ``token_table`` (default ``F -> 1, M -> 0``) case-insensitively.
    """
    path = Path(path)
    table = {k.upper(): int(v) for k, v in (token_table or DEFAULT_TOKEN_TABLE).items()}
    labels: dict[str, int] = {}
    skip_header = header and format == "tsv"
    for number, line in _read_lines(path, "latin-1" if format == "ml1m_users" else "utf-8"):
        if skip_header:
            skip_header = False
            continue
        fields = line.split("::") if format == "ml1m_users" else line.split("\t")
        expected = 5 if format == "ml1m_users" else 2
        if len(fields) < expected:
            raise DataFormatError(path, number, f"expected {expected} fields, found {len(fields)}")
        user, token = fields[0].strip(), fields[1].strip()
        if token.upper() not in table:
            raise DataFormatError(path, number, f"unknown sensitive token {token!r}")
        labels[user] = table[token.upper()]
    logger.debug(f"Loaded {len(labels)} sensitive labels from {path}")
    return labels


def attach_sensitive(ds: InteractionDataset, labels: Mapping[str, int]) -> InteractionDataset:
    """Attach labels to every dataset user, or report all users without one."""
    missing = [user for user in ds.user_ids if user not in labels]
    if missing:
        raise CoverageError(missing)
    return ds.with_sensitive(np.asarray([labels[user] for user in ds.user_ids], dtype=np.int64))


def subsample_users(ds: InteractionDataset, fraction: float, seed: int) -> InteractionDataset:
    """Keep a seeded random ``fraction`` of users, re-indexed densely in original order.

    The item index space is left untouched.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return ds
    keep_count = max(1, int(np.floor(ds.n_users * fraction + 1e-9)))
    kept = np.sort(derive_rng(seed, "subsample_users").choice(ds.n_users, size=keep_count, replace=False))
    remap = np.full(ds.n_users, -1, dtype=np.int64)
    remap[kept] = np.arange(keep_count)
    mask = remap[ds.users] >= 0
    logger.info(f"Subsampled {keep_count} of {ds.n_users} users (fraction={fraction})")
    return InteractionDataset(
        user_ids=tuple(ds.user_ids[u] for u in kept),
        item_ids=ds.item_ids,
        users=remap[ds.users[mask]],
        items=ds.items[mask],
        sensitive=None if ds.sensitive is None else ds.sensitive[kept],
    )
