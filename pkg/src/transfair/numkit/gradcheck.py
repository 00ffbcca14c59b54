"""Central finite-difference checks of tape gradients."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import GradCheckError
from .tape import Tape, Tensor


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    worst_parameter: str
    worst_index: tuple[int, ...]
    tolerance: float
    checked_entries: int

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(|a|, |n|, 1e-8), elementwise."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def _evaluate(loss_fn: Callable[[], Tensor]) -> float:
    value = loss_fn().item()
    if not np.isfinite(value):
        raise GradCheckError(f"loss is not finite ({value}); cannot take finite differences")
    return value


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    tolerance: float = 1e-4,
    *,
    step: float = 1e-5,
    gradients: Sequence[np.ndarray] | None = None,
) -> GradCheckReport:
    """Compare tape gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must rebuild the loss from the current parameter values and be
    deterministic (seed any dropout inside it). ``gradients`` replaces the tape
    gradients, which lets callers verify that the checker catches wrong ones.
    """
    if gradients is None:
        with Tape() as tape:
            loss = loss_fn()
        if not np.isfinite(loss.item()):
            raise GradCheckError(f"loss is not finite ({loss.item()})")
        gradients = tape.gradient(loss, params)

    worst = (0.0, "", ())
    checked = 0
    for param, analytic in zip(params, gradients, strict=True):
        original = param.value
        numeric = np.zeros_like(original)
        for index in np.ndindex(original.shape):
            bumped = original.copy()
            bumped[index] += step
            param.value = bumped
            upper = _evaluate(loss_fn)
            bumped = original.copy()
            bumped[index] -= step
            param.value = bumped
            lower = _evaluate(loss_fn)
            numeric[index] = (upper - lower) / (2.0 * step)
        param.value = original

        errors = relative_error(np.asarray(analytic), numeric)
        checked += errors.size
        if errors.size:
            flat = int(np.argmax(errors))
            if errors.flat[flat] > worst[0]:
                worst = (float(errors.flat[flat]), param.name, np.unravel_index(flat, errors.shape))

    max_error, name, index = worst
    return GradCheckReport(
        max_relative_error=max_error,
        worst_parameter=name,
        worst_index=tuple(int(i) for i in index),
        tolerance=tolerance,
        checked_entries=checked,
    )
