"""Parameter bundles for affine layers."""

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..errors import ShapeError
from .tape import Tensor

InitScheme = Literal["normal", "fan_in"]


@dataclass
class NormState:
    """Batch-normalization scale/shift plus running statistics for one layer."""

    scale: Tensor
    shift: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray

    @classmethod
    def fresh(cls, width: int, name: str = "") -> "NormState":
        return cls(
            scale=Tensor(np.ones((1, width)), name=f"{name}norm.scale", trainable=True),
            shift=Tensor(np.zeros((1, width)), name=f"{name}norm.shift", trainable=True),
            running_mean=np.zeros((1, width)),
            running_var=np.ones((1, width)),
        )


@dataclass
class SpectralState:
    """Persistent power-iteration vectors; ``u`` spans fan-in, ``v`` spans fan-out."""

    u: np.ndarray
    v: np.ndarray

    @classmethod
    def random(cls, fan_in: int, fan_out: int, rng: np.random.Generator) -> "SpectralState":
        u = rng.standard_normal(fan_in)
        v = rng.standard_normal(fan_out)
        return cls(u=u / max(np.linalg.norm(u), 1e-12), v=v / max(np.linalg.norm(v), 1e-12))


@dataclass
class LayerParams:
    """Weight (fan-in x fan-out), bias row and optional normalization state."""

    weight: Tensor
    bias: Tensor
    norm_state: NormState | None = None
    spectral_state: SpectralState | None = None
    name: str = field(default="")

    def __post_init__(self) -> None:
        if self.bias.shape != (1, self.weight.cols):
            raise ShapeError(f"bias shape {self.bias.shape} does not match weight fan-out {self.weight.cols}")
        if self.norm_state is not None and self.norm_state.scale.shape != (1, self.weight.cols):
            raise ShapeError("normalization width does not match weight fan-out")

    @property
    def fan_in(self) -> int:
        return self.weight.rows

    @property
    def fan_out(self) -> int:
        return self.weight.cols

    @classmethod
    def init(
        cls,
        fan_in: int,
        fan_out: int,
        rng: np.random.Generator,
        *,
        scheme: InitScheme = "fan_in",
        std: float = 0.01,
        batch_norm: bool = False,
        spectral: bool = False,
        name: str = "",
    ) -> "LayerParams":
        """Draw a fresh layer; ``normal`` uses N(0, std^2), ``fan_in`` uses N(0, 1/fan_in)."""
        scale = std if scheme == "normal" else 1.0 / np.sqrt(fan_in)
        weight = Tensor(rng.normal(0.0, scale, size=(fan_in, fan_out)), name=f"{name}weight", trainable=True)
        bias = Tensor(np.zeros((1, fan_out)), name=f"{name}bias", trainable=True)
        return cls(
            weight=weight,
            bias=bias,
            norm_state=NormState.fresh(fan_out, name) if batch_norm else None,
            spectral_state=SpectralState.random(fan_in, fan_out, rng) if spectral else None,
            name=name,
        )

    def parameters(self) -> list[Tensor]:
        params = [self.weight, self.bias]
        if self.norm_state is not None:
            params += [self.norm_state.scale, self.norm_state.shift]
        return params

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        state = {f"{prefix}weight": self.weight.value, f"{prefix}bias": self.bias.value}
        if self.norm_state is not None:
            state[f"{prefix}norm.scale"] = self.norm_state.scale.value
            state[f"{prefix}norm.shift"] = self.norm_state.shift.value
            state[f"{prefix}norm.running_mean"] = self.norm_state.running_mean
            state[f"{prefix}norm.running_var"] = self.norm_state.running_var
        if self.spectral_state is not None:
            state[f"{prefix}spectral.u"] = self.spectral_state.u
            state[f"{prefix}spectral.v"] = self.spectral_state.v
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = "") -> None:
        def take(key: str, like: np.ndarray) -> np.ndarray:
            array = np.asarray(state[f"{prefix}{key}"], dtype=np.float64)
            if array.size != like.size:
                raise ShapeError(f"{prefix}{key}: expected {like.shape}, got {array.shape}")
            return array.reshape(like.shape).copy()

        self.weight.value = take("weight", self.weight.value)
        self.bias.value = take("bias", self.bias.value)
        if self.norm_state is not None:
            norm = self.norm_state
            norm.scale.value = take("norm.scale", norm.scale.value)
            norm.shift.value = take("norm.shift", norm.shift.value)
            norm.running_mean = take("norm.running_mean", norm.running_mean)
            norm.running_var = take("norm.running_var", norm.running_var)
        if self.spectral_state is not None:
            self.spectral_state.u = take("spectral.u", self.spectral_state.u)
            self.spectral_state.v = take("spectral.v", self.spectral_state.v)
