"""Paired significance testing between per-user metric sequences."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import ProtocolError


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    p_value: float
    significant: bool
    degenerate: bool
    n: int
    mean_difference: float


def paired_t_test(
    a: Sequence[float] | np.ndarray,
    b: Sequence[float] | np.ndarray,
    alpha: float = 0.05,
) -> TTestResult:
    """Two-sided paired t-test of ``a - b``.

    When the differences have zero variance the statistic is undefined:
    ``degenerate`` is set, the statistic and p-value are NaN and the result is
    never significant.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise ProtocolError(f"paired test needs equal lengths, got {a.size} and {b.size}")
    if a.size < 2:
        raise ProtocolError("paired test needs at least two pairs")

    diff = a - b
    n = diff.size
    mean = float(diff.mean())
    spread = float(diff.std(ddof=1))
    if spread == 0.0:
        return TTestResult(float("nan"), float("nan"), False, True, n, mean)

    statistic = mean / (spread / np.sqrt(n))
    p_value = float(2.0 * stats.t.sf(abs(statistic), df=n - 1))
    return TTestResult(float(statistic), p_value, p_value < alpha, False, n, mean)
