"""Realized volatility, return-series statistics, and empirical CVaR."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DAYS_PER_YEAR = 365.0


@dataclass(frozen=True)
class ReturnStats:
    mean_daily: float
    vol_daily: float  # sample standard deviation (n-1); nan with fewer than 2 points


def realized_volatility(prices, periods_per_year: float = DAYS_PER_YEAR) -> float:
    """Annualized realized volatility from daily closes.

        sigma_r = sqrt((365/T) * sum_i ln(S_i / S_{i-1})^2)

    with T the number of daily log returns. The log return is squared; the
    unsquared radicand sometimes seen in print is dimensionally wrong and can
    go negative.
    """
    arr = np.asarray(prices, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("need at least 2 prices")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("prices must be positive and finite")
    log_returns = np.diff(np.log(arr))
    return math.sqrt(periods_per_year / log_returns.size * np.sum(log_returns**2))


def return_stats(returns) -> ReturnStats:
    """Arithmetic mean and sample standard deviation of a daily return series."""
    arr = _as_return_array(returns)
    mean = float(np.mean(arr))
    vol = float(np.std(arr, ddof=1)) if arr.size >= 2 else float("nan")
    return ReturnStats(mean_daily=mean, vol_daily=vol)


def cvar(returns, level: float = 0.05) -> float:
    """Empirical conditional value at risk: mean of the worst-tail returns.

    The tail holds the k = ceil(level * n) smallest observations, so the
    estimator is well defined on tiny samples and reduces to the plain mean
    at level 1.
    """
    arr = _as_return_array(returns)
    if not (0.0 < level <= 1.0):
        raise ValueError(f"level must be in (0, 1], got {level}")
    k = math.ceil(level * arr.size)
    tail = np.partition(arr, k - 1)[:k]
    return float(np.mean(tail))


def _as_return_array(returns) -> np.ndarray:
    arr = np.asarray(returns, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("return series must be non-empty and 1-d")
    if np.any(~np.isfinite(arr)) or np.any(arr <= -1.0):
        raise ValueError("returns must be finite and > -1")
    return arr
