"""
dataset - interaction data, cold-start splits and negative sampling.
"""

from .loaders import (
    DEFAULT_TOKEN_TABLE,
    attach_sensitive,
    load_interactions,
    load_sensitive,
    subsample_users,
)
from .models import (
    DOMAINS,
    ROLES,
    DatasetStats,
    Domain,
    DomainSplit,
    InteractionDataset,
    Role,
    UserAssignment,
    dataset_stats,
)
from .sampling import ItemCatalog, NegativeSampler, minibatches, sample_negatives
from .splits import cold_start_split, leave_one_out
from .storage import format_split, read_split, write_split
from .synthetic import make_planted_dataset, two_gaussian_toy

__all__ = [
    "DEFAULT_TOKEN_TABLE",
    "DOMAINS",
    "ROLES",
    "DatasetStats",
    "Domain",
    "DomainSplit",
    "InteractionDataset",
    "ItemCatalog",
    "NegativeSampler",
    "Role",
    "UserAssignment",
    "attach_sensitive",
    "cold_start_split",
    "dataset_stats",
    "format_split",
    "leave_one_out",
    "load_interactions",
    "load_sensitive",
    "make_planted_dataset",
    "minibatches",
    "read_split",
    "sample_negatives",
    "subsample_users",
    "two_gaussian_toy",
    "write_split",
]
