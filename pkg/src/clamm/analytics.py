"""Position valuation, impermanent loss, and return under price change.

Everything is valued in Y-token units at the evaluation price: a position
holding (x, y) at price S is worth S*x + y. Impermanent loss compares the
position against simply holding the tokens deposited at entry, so it is <= 0
by construction and independent of fees.

All scalar functions broadcast over numpy arrays of prices.
"""

from __future__ import annotations

import math

import numpy as np

from .amm import PriceRange, position_reserves

DEFAULT_RATIO_BOUNDS = (0.05, 20.0)
DEFAULT_RATIO_POINTS = 400
ENTRY_MODES = ("mid", "lower", "upper")


def il_v2(entry_price, price):
    """Impermanent loss of a full-range position.

        IL = 2*sqrt(r) / (1 + r) - 1,   r = S1/S0

    Depends only on the price ratio, is 0 at r = 1 and negative elsewhere,
    and is symmetric under r -> 1/r.
    """
    _check_prices(entry_price, price)
    r = np.divide(price, entry_price)
    return 2.0 * np.sqrt(r) / (1.0 + r) - 1.0


def position_value(liquidity, price, price_range: PriceRange | None = None):
    """Value of the position's current reserves: S1*x(S1) + y(S1)."""
    x, y = position_reserves(liquidity, price, price_range)
    return price * x + y


def hold_value(liquidity, entry_price, price, price_range: PriceRange | None = None):
    """Value of the tokens deposited at entry, marked at the later price."""
    x0, y0 = position_reserves(liquidity, entry_price, price_range)
    return price * x0 + y0


def il_v3(entry_price, price, price_range: PriceRange | None = None, liquidity: float = 1.0):
    """Impermanent loss of a range position: (V_pos - V_hold) / V_hold.

    Both values route through the same reserve computation, so the loss is
    exactly 0.0 when the price has not moved and in the regions where the
    position's composition cannot differ from the deposit (e.g. entered at
    the lower bound and the price stayed below it).
    """
    v_hold = hold_value(liquidity, entry_price, price, price_range)
    if np.any(np.asarray(v_hold) <= 0.0):
        raise ValueError("degenerate position: hold value is zero")
    v_pos = position_value(liquidity, price, price_range)
    return (v_pos - v_hold) / v_hold


def position_return(
    entry_price,
    price,
    price_range: PriceRange | None = None,
    fees: float = 0.0,
    liquidity: float = 1.0,
):
    """Total return including fees: (V_pos + F - V_hold) / V_hold.

    ``fees`` is the fee income valued in Y at the evaluation price. Computed
    as IL + F/V_hold so the fee/loss decomposition is exact.
    """
    if np.any(np.asarray(fees) < 0.0):
        raise ValueError(f"fees must be non-negative, got {fees}")
    v_hold = hold_value(liquidity, entry_price, price, price_range)
    if np.any(np.asarray(v_hold) <= 0.0):
        raise ValueError("degenerate position: hold value is zero")
    return il_v3(entry_price, price, price_range, liquidity) + fees / v_hold


def width_range(entry_price: float, alpha: float) -> PriceRange:
    """Symmetric range [S0/alpha, alpha*S0] around the entry price."""
    if not (alpha > 1.0 and math.isfinite(alpha)):
        raise ValueError(f"width parameter must be > 1, got {alpha}")
    return PriceRange(entry_price / alpha, alpha * entry_price)


def entry_range(entry_price: float, alpha: float, entry: str = "mid") -> PriceRange:
    """Range for an entry mode: centered, or minted at the lower/upper bound.

    'mid' gives [S0/alpha, alpha*S0]; 'lower' mints at the bottom of
    [S0, alpha*S0]; 'upper' mints at the top of [S0/alpha, S0].
    """
    if entry not in ENTRY_MODES:
        raise ValueError(f"entry must be one of {ENTRY_MODES}, got {entry!r}")
    if not (alpha > 1.0 and math.isfinite(alpha)):
        raise ValueError(f"width parameter must be > 1, got {alpha}")
    if entry == "mid":
        return PriceRange(entry_price / alpha, alpha * entry_price)
    if entry == "lower":
        return PriceRange(entry_price, alpha * entry_price)
    return PriceRange(entry_price / alpha, entry_price)


def default_ratio_grid(
    lo: float = DEFAULT_RATIO_BOUNDS[0],
    hi: float = DEFAULT_RATIO_BOUNDS[1],
    n: int = DEFAULT_RATIO_POINTS,
) -> np.ndarray:
    """Log-spaced price-ratio grid with the no-move point 1.0 always included."""
    if not (0.0 < lo < hi) or n < 2:
        raise ValueError(f"need 0 < lo < hi and n >= 2, got lo={lo}, hi={hi}, n={n}")
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), n))
    if lo < 1.0 < hi:
        grid = np.unique(np.append(grid, 1.0))
    return grid


def il_curve(
    alpha: float | None,
    ratios: np.ndarray | None = None,
    entry: str = "mid",
    entry_price: float = 1.0,
) -> list[tuple[float, float]]:
    """Impermanent-loss curve over a grid of price ratios S1/S0.

    ``alpha=None`` gives the full-range baseline. Returns (ratio, il) pairs.
    """
    if ratios is None:
        ratios = default_ratio_grid()
    ratios = np.asarray(ratios, dtype=float)
    if ratios.ndim != 1 or ratios.size == 0 or np.any(ratios <= 0.0):
        raise ValueError("ratios must be a non-empty 1-d array of positive numbers")
    prices = ratios * entry_price
    if alpha is None:
        ils = il_v2(entry_price, prices)
    else:
        price_range = entry_range(entry_price, alpha, entry)
        ils = il_v3(entry_price, prices, price_range)
    return list(zip(ratios.tolist(), np.asarray(ils, dtype=float).tolist()))


def _check_prices(*prices) -> None:
    for p in prices:
        arr = np.asarray(p)
        if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
            raise ValueError("prices must be positive and finite")
