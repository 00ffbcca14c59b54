"""
Adam and SGD updates.

``adam_step`` and ``sgd_step`` are pure functions of (params, grads, state);
``Optimizer`` binds one of them to a list of parameter tensors for the
training loops.
"""

from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from ..errors import ShapeError
from .tape import Tensor

OptimizerKind = Literal["adam", "sgd"]


@dataclass(frozen=True)
class OptimizerState:
    kind: OptimizerKind
    learning_rate: float
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    first_moment: tuple[np.ndarray, ...] = ()
    second_moment: tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")


def adam_state(
    params: Sequence[np.ndarray],
    learning_rate: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> OptimizerState:
    return OptimizerState(
        kind="adam",
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        first_moment=tuple(np.zeros_like(p) for p in params),
        second_moment=tuple(np.zeros_like(p) for p in params),
    )


def sgd_state(learning_rate: float) -> OptimizerState:
    return OptimizerState(kind="sgd", learning_rate=learning_rate)


def _check_shapes(params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    for i, (p, g) in enumerate(zip(params, grads, strict=True)):
        if p.shape != g.shape:
            raise ShapeError(f"parameter {i}: shape {p.shape} vs gradient {g.shape}")


def adam_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: OptimizerState
) -> tuple[list[np.ndarray], OptimizerState]:
    """One bias-corrected Adam update."""
    if state.kind != "adam":
        raise ValueError(f"adam_step needs an adam state, got {state.kind}")
    _check_shapes(params, grads)
    _check_shapes(params, state.first_moment)

    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**t
    correction2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment, strict=True):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        new_params.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
        new_m.append(m)
        new_v.append(v)
    return new_params, replace(state, step_count=t, first_moment=tuple(new_m), second_moment=tuple(new_v))


def sgd_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: OptimizerState
) -> tuple[list[np.ndarray], OptimizerState]:
    """params - lr * grads."""
    if state.kind != "sgd":
        raise ValueError(f"sgd_step needs an sgd state, got {state.kind}")
    _check_shapes(params, grads)
    new_params = [p - state.learning_rate * g for p, g in zip(params, grads, strict=True)]
    return new_params, replace(state, step_count=state.step_count + 1)


class Optimizer:
    """Applies Adam or SGD updates to a fixed list of trainable tensors."""

    def __init__(self, params: Sequence[Tensor], state: OptimizerState):
        frozen = [p.name for p in params if not p.trainable]
        if frozen:
            raise ValueError(f"optimizer received frozen tensors: {frozen}")
        self.params = list(params)
        self.state = state

    @classmethod
    def adam(cls, params: Sequence[Tensor], learning_rate: float = 0.001) -> "Optimizer":
        return cls(params, adam_state([p.value for p in params], learning_rate))

    @classmethod
    def sgd(cls, params: Sequence[Tensor], learning_rate: float) -> "Optimizer":
        return cls(params, sgd_state(learning_rate))

    def step(self, grads: Sequence[np.ndarray]) -> None:
        update = adam_step if self.state.kind == "adam" else sgd_step
        new_values, self.state = update([p.value for p in self.params], grads, self.state)
        for param, value in zip(self.params, new_values, strict=True):
            param.value = value

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        state: dict[str, np.ndarray] = {}
        for i, (m, v) in enumerate(zip(self.state.first_moment, self.state.second_moment, strict=True)):
            state[f"{prefix}{i}.m"] = m
            state[f"{prefix}{i}.v"] = v
        return state
