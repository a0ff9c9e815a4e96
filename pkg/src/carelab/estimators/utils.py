"""Wald ratio and winsorization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd


class WeakFirstStageError(ValueError):
    pass


@dataclass(frozen=True)
class WaldRatio:
    estimate: float
    se: float


def wald_ratio(
    reduced_form: float,
    first_stage: float,
    var_rf: float = 0.0,
    var_fs: float = 0.0,
    cov: float = 0.0,
    tol: float = 1e-8,
) -> WaldRatio:
    """Implied effect ``reduced_form / first_stage`` with a delta-method SE."""
    if not np.isfinite(first_stage) or abs(first_stage) < tol:
        raise WeakFirstStageError(
            f"first stage {first_stage!r} is below the tolerance {tol:g}"
        )
    ratio = reduced_form / first_stage
    # Gradient of b/a: (1/a, -b/a^2).
    g_rf, g_fs = 1.0 / first_stage, -ratio / first_stage
    var = g_rf**2 * var_rf + g_fs**2 * var_fs + 2 * g_rf * g_fs * cov
    return WaldRatio(float(ratio), float(np.sqrt(max(var, 0.0))))


def nearest_rank(values: np.ndarray, p: float) -> float:
    """Smallest value with at least ``p`` percent of observations at or below it."""
    x = np.sort(np.asarray(values, dtype=float))
    k = int(np.ceil(p / 100.0 * x.size))
    return float(x[max(k, 1) - 1])


def winsorize(column, upper_percentile: float = 99.0):
    """Cap values above the nearest-rank ``upper_percentile``; NaN stays NaN.

    Returns the same container type as ``column`` (Series or array).
    """
    if not 50.0 < upper_percentile <= 100.0:
        raise ValueError("upper_percentile must lie in (50, 100]")
    is_series = isinstance(column, pd.Series)
    x = column.to_numpy(dtype=float, na_value=np.nan) if is_series else np.asarray(column, dtype=float)
    finite = ~np.isnan(x)
    if not finite.any():
        raise ValueError("cannot winsorize an all-missing column")
    cap = nearest_rank(x[finite], upper_percentile)
    out = np.where(finite, np.minimum(x, cap), x)
    if is_series:
        return pd.Series(out, index=column.index, name=column.name)
    return out
