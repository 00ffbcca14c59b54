"""
Scorer specifications and model state.

A ``ModelState`` owns the user/item embedding tables of one recommender and
whatever auxiliary parameters its kind needs: biases for BiasedMF, two towers
for DMF, a matching network for MLP.
"""

import copy
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..errors import ShapeError
from ..numkit.layers import DEFAULT_SLOPE, MLP
from ..numkit.params import InitScheme
from ..numkit.rng import derive_rng
from ..numkit.tape import Tensor

ScorerKind = Literal["pmf", "biasedmf", "dmf", "mlp"]
ParameterGroup = Literal["users", "items", "network", "all"]


class ScorerSpec(BaseModel):
    """Which base recommender to build and how wide it is."""

    model_config = ConfigDict(extra="forbid")

    kind: ScorerKind = Field(default="pmf", description="pmf, biasedmf, dmf or mlp")
    dim: int = Field(default=32, ge=1, description="Embedding dimension d")
    hidden: list[int] | None = Field(
        default=None, description="Hidden sizes of the DMF towers or the MLP matcher (kind-specific default)"
    )
    slope: float = Field(default=DEFAULT_SLOPE, gt=0.0, lt=1.0, description="Leaky-ReLU negative slope")
    embedding_std: float = Field(default=0.01, gt=0.0, description="Std of the N(0, std^2) embedding init")
    network_init: InitScheme = Field(
        default="normal", description="Init of tower/matcher weights: normal (N(0, embedding_std^2)) or fan_in"
    )

    def tower_sizes(self) -> list[int]:
        """DMF tower: d -> hidden... -> d."""
        return [self.dim, *(self.hidden if self.hidden is not None else [self.dim]), self.dim]

    def matcher_sizes(self) -> list[int]:
        """MLP matcher: 2d -> hidden... -> 1."""
        hidden = self.hidden if self.hidden is not None else [self.dim, max(self.dim // 2, 1)]
        return [2 * self.dim, *hidden, 1]


class ModelState:
    """Embedding tables and network parameters of one recommender."""

    def __init__(
        self,
        spec: ScorerSpec,
        user_embeddings: Tensor,
        item_embeddings: Tensor,
        *,
        user_bias: Tensor | None = None,
        item_bias: Tensor | None = None,
        global_bias: Tensor | None = None,
        user_tower: MLP | None = None,
        item_tower: MLP | None = None,
        matcher: MLP | None = None,
    ):
        if user_embeddings.cols != spec.dim or item_embeddings.cols != spec.dim:
            raise ShapeError(
                f"embedding widths {user_embeddings.cols}/{item_embeddings.cols} do not match dim {spec.dim}"
            )
        self.spec = spec
        self.user_embeddings = user_embeddings
        self.item_embeddings = item_embeddings
        self.user_bias = user_bias
        self.item_bias = item_bias
        self.global_bias = global_bias
        self.user_tower = user_tower
        self.item_tower = item_tower
        self.matcher = matcher

    @property
    def kind(self) -> ScorerKind:
        return self.spec.kind

    @property
    def n_users(self) -> int:
        return self.user_embeddings.rows

    @property
    def n_items(self) -> int:
        return self.item_embeddings.rows

    @property
    def dim(self) -> int:
        return self.spec.dim

    def _groups(self) -> dict[str, list[Tensor]]:
        network: list[Tensor] = []
        for mlp in (self.user_tower, self.item_tower, self.matcher):
            if mlp is not None:
                network += mlp.parameters()
        if self.global_bias is not None:
            network.append(self.global_bias)
        return {
            "users": [t for t in (self.user_embeddings, self.user_bias) if t is not None],
            "items": [t for t in (self.item_embeddings, self.item_bias) if t is not None],
            "network": network,
        }

    def network_parameters(self) -> list[Tensor]:
        """Tower, matcher and global-bias tensors (everything but the per-user and per-item tables)."""
        return list(self._groups()["network"])

    def named_parameters(self) -> dict[str, Tensor]:
        return {t.name: t for group in self._groups().values() for t in group}

    def parameters(self, trainable_only: bool = True) -> list[Tensor]:
        return [t for t in self.named_parameters().values() if t.trainable or not trainable_only]

    def _select(self, groups: tuple[ParameterGroup, ...]) -> list[Tensor]:
        table = self._groups()
        chosen: list[Tensor] = []
        for group in groups or ("all",):
            if group == "all":
                chosen += [t for g in table.values() for t in g]
            elif group in table:
                chosen += table[group]
            else:
                raise ValueError(f"unknown parameter group {group!r}")
        return chosen

    def freeze(self, *groups: ParameterGroup) -> "ModelState":
        """Mark parameter groups (default: all) as frozen."""
        for tensor in self._select(groups):
            tensor.trainable = False
        return self

    def unfreeze(self, *groups: ParameterGroup) -> "ModelState":
        for tensor in self._select(groups):
            tensor.trainable = True
        return self

    def frozen_flags(self) -> dict[str, bool]:
        return {name: not t.trainable for name, t in self.named_parameters().items()}

    def set_frozen_flags(self, flags: dict[str, bool]) -> None:
        for name, tensor in self.named_parameters().items():
            if name in flags:
                tensor.trainable = not flags[name]

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {f"{prefix}{name}": t.value for name, t in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = "") -> None:
        for name, tensor in self.named_parameters().items():
            value = np.asarray(state[f"{prefix}{name}"], dtype=np.float64)
            if value.size != tensor.value.size:
                raise ShapeError(f"{prefix}{name}: expected {tensor.shape}, got {value.shape}")
            tensor.value = value.reshape(tensor.shape).copy()

    def clone(self) -> "ModelState":
        return copy.deepcopy(self)

    def __repr__(self) -> str:
        return f"ModelState(kind={self.kind}, users={self.n_users}, items={self.n_items}, dim={self.dim})"


def init_model(spec: ScorerSpec, n_users: int, n_items: int, seed: int) -> ModelState:
    """Fresh recommender: embeddings drawn N(0, embedding_std^2), biases zero."""
    rng = derive_rng(seed, "init_model")
    std = spec.embedding_std
    users = Tensor(rng.normal(0.0, std, size=(n_users, spec.dim)), name="user_embeddings", trainable=True)
    items = Tensor(rng.normal(0.0, std, size=(n_items, spec.dim)), name="item_embeddings", trainable=True)
    mlp_options = {"slope": spec.slope, "init": spec.network_init, "init_std": std}

    if spec.kind == "biasedmf":
        return ModelState(
            spec,
            users,
            items,
            user_bias=Tensor(np.zeros((n_users, 1)), name="user_bias", trainable=True),
            item_bias=Tensor(np.zeros((n_items, 1)), name="item_bias", trainable=True),
            global_bias=Tensor(np.zeros((1, 1)), name="global_bias", trainable=True),
        )
    if spec.kind == "dmf":
        return ModelState(
            spec,
            users,
            items,
            user_tower=MLP(spec.tower_sizes(), rng, name="user_tower.", **mlp_options),
            item_tower=MLP(spec.tower_sizes(), rng, name="item_tower.", **mlp_options),
        )
    if spec.kind == "mlp":
        return ModelState(spec, users, items, matcher=MLP(spec.matcher_sizes(), rng, name="matcher.", **mlp_options))
    return ModelState(spec, users, items)
