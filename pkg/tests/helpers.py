"""Shared test oracles, independent of the library's swap/tick bookkeeping."""

from __future__ import annotations

import numpy as np
from numba import njit

from clamm.amm import Pool, tick_to_sqrt_price


def liquidity_profile(pool: Pool) -> tuple[np.ndarray, np.ndarray]:
    """Sqrt-price breakpoints and cumulative liquidity, rebuilt from raw deltas.

    cum[i] is the liquidity live for sqrt prices in [breaks[i], breaks[i+1]);
    below breaks[0] and at/above breaks[-1] there is none (deltas sum to 0).
    """
    ticks = sorted(pool.ticks)
    breaks = np.array([tick_to_sqrt_price(t) for t in ticks])
    cum = np.cumsum([pool.ticks[t].liquidity_net for t in ticks])
    return breaks, cum


@njit
def micro_swap(breaks, cum_liq, sp0, fee, gross_in, n_steps, down):
    """Brute-force swap integrator: n_steps fee-on-input micro slices.

    Each slice looks up the active liquidity at the current sqrt price and
    applies the single-range formula; there is no tick-crossing bookkeeping,
    so boundary handling errors are O(1/n_steps). Zero-liquidity stretches
    are bridged by jumping to the next breakpoint without consuming input.
    Returns (amount_out, final_sqrt_price, effective_input_consumed).
    """
    p = sp0
    out = 0.0
    consumed = 0.0
    h = gross_in * (1.0 - fee) / n_steps
    for _ in range(n_steps):
        idx = np.searchsorted(breaks, p, side="right") - 1
        liq = cum_liq[idx] if idx >= 0 else 0.0
        if liq <= 0.0:
            if down:
                if idx < 0:
                    break
                p = breaks[idx] * (1.0 - 5e-16)
            else:
                j = np.searchsorted(breaks, p, side="right")
                if j >= breaks.size:
                    break
                p = breaks[j]
            continue
        if down:
            p_new = liq * p / (liq + p * h)
            out += liq * (p - p_new)
        else:
            p_new = p + h / liq
            out += liq * (1.0 / p - 1.0 / p_new)
        p = p_new
        consumed += h
    return out, p, consumed


def micro_swap_oracle(
    pool: Pool, token_in: str, amount_in: float, n_steps: int = 10**6
) -> tuple[float, float]:
    """Run the micro integrator against a pool's pre-swap state."""
    breaks, cum = liquidity_profile(pool)
    out, sp, _ = micro_swap(
        breaks, cum, pool.sqrt_price, pool.fee, amount_in, n_steps, token_in == "x"
    )
    return out, sp


def effective_capacity(pool: Pool, down: bool, sp_to: float) -> float:
    """Effective (fee-reduced) input the book can absorb down/up to sp_to."""
    breaks, cum = liquidity_profile(pool)
    sp_from = pool.sqrt_price
    cap = 0.0
    for i in range(breaks.size - 1):
        liq = cum[i]
        if liq <= 0.0:
            continue
        seg_lo, seg_hi = breaks[i], breaks[i + 1]
        if down:
            lo = max(seg_lo, sp_to)
            hi = min(seg_hi, sp_from)
            if hi > lo:
                cap += liq * (1.0 / lo - 1.0 / hi)
        else:
            lo = max(seg_lo, sp_from)
            hi = min(seg_hi, sp_to)
            if hi > lo:
                cap += liq * (hi - lo)
    return cap


def random_two_range_scenario(rng: np.random.Generator):
    """Pool with two ranges of different liquidity plus a trade sized to cross
    at least one initialized tick and end strictly inside the far range."""
    fee = float(rng.choice([0.0005, 0.003, 0.01]))
    pool = Pool(fee=fee, tick_spacing=10, initial_price=1.0)
    spacing = pool.tick_spacing
    width1 = int(rng.integers(4, 30)) * spacing
    width2 = int(rng.integers(4, 30)) * spacing
    # first range must contain tick 0 (the initial price)
    lower1 = -int(rng.integers(1, width1 // spacing)) * spacing
    upper1 = lower1 + width1
    overlap = int(rng.integers(0, width1 // spacing)) * spacing
    overlap = min(overlap, width2 - spacing)
    liq1 = float(rng.uniform(5.0, 200.0))
    liq2 = float(rng.uniform(5.0, 200.0))
    down = bool(rng.integers(0, 2))
    if down:
        upper2 = lower1 + overlap
        lower2 = upper2 - width2
    else:
        lower2 = upper1 - overlap
        upper2 = lower2 + width2
    pool.mint(lower1, upper1, liq1)
    pool.mint(lower2, upper2, liq2)

    token_in = "x" if down else "y"
    initialized = sorted(pool.ticks)
    if down:
        first_boundary = max(t for t in initialized if t < 0)
        far_end = min(initialized)
    else:
        first_boundary = min(t for t in initialized if t > 0)
        far_end = max(initialized)
    cap_first = effective_capacity(pool, down, tick_to_sqrt_price(first_boundary))
    cap_total = effective_capacity(pool, down, tick_to_sqrt_price(far_end))
    eff = cap_first + (cap_total - cap_first) * rng.uniform(0.05, 0.9)
    amount_in = eff / (1.0 - fee)
    return pool, token_in, amount_in
