"""
Differentiable operations on ``Tensor`` values.

Each operation computes its output with numpy at 64-bit precision and, when a
``Tape`` is active, records a closure producing the input gradients.
"""

from collections.abc import Sequence
from typing import Literal

import numpy as np
from scipy.special import expit

from ..errors import DegenerateBatchError, ShapeError
from .params import LayerParams
from .tape import Tensor, record

Mode = Literal["train", "eval"]

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.1
SPECTRAL_EPSILON = 1e-12
LOG_FLOOR = float(np.log(1e-12))


def _as_tensor(value: Tensor | np.ndarray | float) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_mode(mode: str) -> None:
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")


def constant(value: np.ndarray | float) -> Tensor:
    """Wrap a value that gradients never flow into."""
    return Tensor(value)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: {a.shape} x {b.shape}")
    out = Tensor(a.value @ b.value)
    return record(out, (a, b), lambda g: (g @ b.value.T, a.value.T @ g))


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from e


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")
    out = Tensor(a.value + b.value)
    return record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "sub")
    out = Tensor(a.value - b.value)
    return record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "mul")
    out = Tensor(a.value * b.value)
    return record(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def scale(a: Tensor, factor: float) -> Tensor:
    out = Tensor(a.value * factor)
    return record(out, (a,), lambda g: (g * factor,))


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.value.sum())
    return record(out, (a,), lambda g: (np.full(a.shape, g.item()),))


def mean_all(a: Tensor) -> Tensor:
    count = a.value.size
    out = Tensor(a.value.mean())
    return record(out, (a,), lambda g: (np.full(a.shape, g.item() / count),))


def square_sum(a: Tensor) -> Tensor:
    out = Tensor(np.sum(a.value * a.value))
    return record(out, (a,), lambda g: (2.0 * g.item() * a.value,))


def gather_rows(table: Tensor, indices: np.ndarray) -> Tensor:
    """Embedding lookup: rows of ``table`` at ``indices`` (duplicates allowed)."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= table.rows):
        raise ShapeError(f"gather_rows: index out of range for table with {table.rows} rows")

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(table.value)
        np.add.at(grad, idx, g)
        return (grad,)

    return record(Tensor(table.value[idx]), (table,), backward)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    rows = {p.rows for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ {sorted(rows)}")
    bounds = np.cumsum([0] + [p.cols for p in parts])
    out = Tensor(np.concatenate([p.value for p in parts], axis=1))
    return record(
        out,
        tuple(parts),
        lambda g: tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(parts))),
    )


def rowwise_dot(a: Tensor, b: Tensor) -> Tensor:
    """Dot product of matching rows, shape (batch, 1)."""
    if a.shape != b.shape:
        raise ShapeError(f"rowwise_dot: {a.shape} vs {b.shape}")
    out = Tensor(np.sum(a.value * b.value, axis=1, keepdims=True))
    return record(out, (a, b), lambda g: (g * b.value, g * a.value))


def sigmoid(a: Tensor) -> Tensor:
    value = expit(a.value)
    return record(Tensor(value), (a,), lambda g: (g * value * (1.0 - value),))


def softplus(a: Tensor) -> Tensor:
    out = Tensor(np.logaddexp(0.0, a.value))
    return record(out, (a,), lambda g: (g * expit(a.value),))


def log_sigmoid(a: Tensor, floor: float = LOG_FLOOR) -> Tensor:
    """ln sigma(a) evaluated stably, clamped below at ``floor`` (ln 1e-12)."""
    raw = -np.logaddexp(0.0, -a.value)
    live = raw > floor
    out = Tensor(np.where(live, raw, floor))
    return record(out, (a,), lambda g: (g * expit(-a.value) * live,))


def leaky_relu(x: Tensor, slope: float) -> Tensor:
    """max(x, slope*x); the subgradient at exactly zero is ``slope``."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    positive = x.value > 0
    out = Tensor(np.where(positive, x.value, slope * x.value))
    return record(out, (x,), lambda g: (np.where(positive, g, slope * g),))


def sigmoid_bce(logits: Tensor, labels: Tensor | np.ndarray) -> Tensor:
    """Mean binary cross-entropy of sigma(logits) against 0/1 labels."""
    y = labels.value if isinstance(labels, Tensor) else np.asarray(labels, dtype=np.float64).reshape(logits.shape)
    if y.shape != logits.shape:
        raise ShapeError(f"sigmoid_bce: logits {logits.shape} vs labels {y.shape}")
    z = logits.value
    count = z.size
    out = Tensor(np.mean(np.logaddexp(0.0, z) - y * z))
    return record(out, (logits,), lambda g: (g.item() * (expit(z) - y) / count,))


def dropout(x: Tensor, rate: float, mode: Mode, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout: train mode zeroes entries with probability ``rate``."""
    _check_mode(mode)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs a random generator")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return record(Tensor(x.value * mask), (x,), lambda g: (g * mask,))


def affine_forward(x: Tensor, p: LayerParams) -> Tensor:
    """x @ W + b."""
    if x.cols != p.fan_in:
        raise ShapeError(f"affine_forward: input has {x.cols} columns, layer fan-in is {p.fan_in}")
    return add(matmul(x, p.weight), p.bias)


def batch_norm(
    x: Tensor,
    p: LayerParams,
    mode: Mode,
    *,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPSILON,
    update_stats: bool = True,
) -> Tensor:
    """Normalize columns by batch statistics (train) or running statistics (eval).

    Train mode uses the population variance and, unless ``update_stats`` is
    false, folds the batch moments into the running statistics with
    ``momentum``.
    """
    _check_mode(mode)
    state = p.norm_state
    if state is None:
        raise ShapeError(f"layer {p.name!r} has no normalization state")
    if x.cols != state.scale.cols:
        raise ShapeError(f"batch_norm: input width {x.cols} vs {state.scale.cols}")
    gamma, beta = state.scale, state.shift

    if mode == "eval":
        inv_std = 1.0 / np.sqrt(state.running_var + eps)
        xhat = (x.value - state.running_mean) * inv_std
        out = Tensor(xhat * gamma.value + beta.value)
        return record(
            out,
            (x, gamma, beta),
            lambda g: (g * gamma.value * inv_std, np.sum(g * xhat, axis=0, keepdims=True), g.sum(0, keepdims=True)),
        )

    n = x.rows
    if n < 2:
        raise DegenerateBatchError(f"batch_norm in train mode needs at least 2 rows, got {n}")
    mean = x.value.mean(axis=0, keepdims=True)
    var = x.value.var(axis=0, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.value - mean) * inv_std
    if update_stats:
        state.running_mean = (1.0 - momentum) * state.running_mean + momentum * mean
        state.running_var = (1.0 - momentum) * state.running_var + momentum * var

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        dxhat = g * gamma.value
        dx = (inv_std / n) * (
            n * dxhat - dxhat.sum(axis=0, keepdims=True) - xhat * np.sum(dxhat * xhat, axis=0, keepdims=True)
        )
        return dx, np.sum(g * xhat, axis=0, keepdims=True), g.sum(axis=0, keepdims=True)

    return record(Tensor(xhat * gamma.value + beta.value), (x, gamma, beta), backward)


def _unit(vector: np.ndarray, eps: float) -> np.ndarray:
    return vector / max(float(np.linalg.norm(vector)), eps)


def spectral_sigma(p: LayerParams) -> float:
    """Current power-iteration estimate u^T W v of the largest singular value."""
    if p.spectral_state is None:
        raise ShapeError(f"layer {p.name!r} has no spectral state")
    return float(p.spectral_state.u @ p.weight.value @ p.spectral_state.v)


def spectral_normalize(
    p: LayerParams, power_iters: int = 1, *, update: bool = True, eps: float = SPECTRAL_EPSILON
) -> LayerParams:
    """Return params whose weight is W / sigma_hat.

    ``power_iters`` rounds of power iteration refine the persistent vectors,
    which are written back in place when ``update`` is true. Gradients flow
    through sigma_hat with the vectors held constant.
    """
    if power_iters < 1:
        raise ValueError("power_iters must be >= 1")
    state = p.spectral_state
    if state is None:
        raise ShapeError(f"layer {p.name!r} has no spectral state")
    w = p.weight.value
    u, v = state.u, state.v
    for _ in range(power_iters):
        v = _unit(w.T @ u, eps)
        u = _unit(w @ v, eps)
    if update:
        state.u[...] = u
        state.v[...] = v

    sigma = float(u @ w @ v)
    clamped = max(sigma, eps)
    outer = np.outer(u, v)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        if sigma <= eps:
            return (g / clamped,)
        return (g / clamped - (np.sum(g * w) / clamped**2) * outer,)

    weight = record(Tensor(w / clamped, name=p.weight.name), (p.weight,), backward)
    return LayerParams(
        weight=weight,
        bias=p.bias,
        norm_state=p.norm_state,
        spectral_state=state,
        name=p.name,
    )
