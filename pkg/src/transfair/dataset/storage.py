"""
Split files.

A split file has one line per retained (user, item) assignment,
``user<TAB>item<TAB>role<TAB>domain`` with external ids, roles
``train|val|test`` and domains ``S|T``, preceded by ``#`` header lines
recording the seed and whether items were held out.
"""

from pathlib import Path

import numpy as np
from loguru import logger

from ..errors import CorruptArtifactError, DataFormatError
from .models import DOMAINS, ROLES, DomainSplit, InteractionDataset, UserAssignment

SPLIT_VERSION = 1


def format_split(split: DomainSplit, ds: InteractionDataset) -> str:
    lines = [
        f"# transfair split v{SPLIT_VERSION}",
        f"# seed={split.seed}",
        f"# held_out={'true' if split.held_out else 'false'}",
    ]
    for user in sorted(split.assignments):
        assignment = split.assignments[user]
        domain = split.domain_of(user)
        uid = ds.user_ids[user]
        for item in assignment.train:
            lines.append(f"{uid}\t{ds.item_ids[item]}\ttrain\t{domain}")
        if assignment.val is not None:
            lines.append(f"{uid}\t{ds.item_ids[assignment.val]}\tval\t{domain}")
        if assignment.test is not None:
            lines.append(f"{uid}\t{ds.item_ids[assignment.test]}\ttest\t{domain}")
    return "\n".join(lines) + "\n"


def write_split(split: DomainSplit, ds: InteractionDataset, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_split(split, ds), encoding="utf-8")
    logger.debug(f"Wrote split to {path}")
    return path


def read_split(path: Path | str, ds: InteractionDataset) -> DomainSplit:
    """Rebuild a split from its file and the dataset it was made from.

    Hidden target interactions and dropped users are recomputed from ``ds``.
    """
    path = Path(path)
    user_index = {uid: u for u, uid in enumerate(ds.user_ids)}
    item_index = {iid: i for i, iid in enumerate(ds.item_ids)}
    seed = 0
    held_out = False
    train: dict[int, list[int]] = {}
    val: dict[int, int] = {}
    test: dict[int, int] = {}
    domains: dict[int, str] = {}

    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise CorruptArtifactError("split", f"cannot read {path}: {e}") from e
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key == "seed":
                try:
                    seed = int(value)
                except ValueError:
                    raise DataFormatError(path, number, f"bad seed {value!r}") from None
            elif key == "held_out":
                held_out = value.strip() == "true"
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise DataFormatError(path, number, f"expected 4 fields, found {len(fields)}")
        uid, iid, role, domain = fields
        if uid not in user_index or iid not in item_index:
            raise DataFormatError(path, number, f"unknown user {uid!r} or item {iid!r}")
        if role not in ROLES or domain not in DOMAINS:
            raise DataFormatError(path, number, f"bad role {role!r} or domain {domain!r}")
        user, item = user_index[uid], item_index[iid]
        if domains.setdefault(user, domain) != domain:
            raise DataFormatError(path, number, f"user {uid!r} appears in both domains")
        if role == "train":
            train.setdefault(user, []).append(item)
        else:
            target = val if role == "val" else test
            if user in target:
                raise DataFormatError(path, number, f"user {uid!r} has two {role} items")
            target[user] = item
            train.setdefault(user, [])

    assignments = {
        user: UserAssignment(train=tuple(sorted(items)), val=val.get(user), test=test.get(user))
        for user, items in train.items()
    }
    source = np.asarray(sorted(u for u, d in domains.items() if d == "S"), dtype=np.int64)
    target = np.asarray(sorted(u for u, d in domains.items() if d == "T"), dtype=np.int64)
    catalog = np.unique(
        np.concatenate(
            [np.asarray(assignments[int(u)].items, dtype=np.int64) for u in source] + [np.empty(0, np.int64)]
        )
    )
    hidden = {
        int(u): tuple(int(i) for i in np.setdiff1d(ds.items_of(int(u)), assignments[int(u)].items)) for u in target
    }
    dropped = tuple(sorted(set(range(ds.n_users)) - set(domains)))
    logger.debug(f"Read split from {path}: {source.size} source users, {target.size} target users")
    return DomainSplit(
        n_users=ds.n_users,
        n_items=ds.n_items,
        seed=seed,
        source_users=source,
        target_users=target,
        assignments=assignments,
        catalog=catalog,
        hidden=hidden,
        sensitive=ds.sensitive,
        dropped_users=dropped,
        held_out=held_out,
    )
