"""Tick-grid CPMM core: price/tick math, liquidity bookkeeping, swaps, fees.

Pool prices are quoted as Y-token per X-token (S = y/x on the virtual
reserves). Selling X pushes S down, selling Y pushes S up. All arithmetic is
double precision; on-chain fixed-point word formats are out of scope.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field

import numpy as np

TICK_BASE = 1.0001
MAX_TICK = 887272  # price spans roughly [2**-128, 2**128]

# Protocol-convention defaults, not math: ship as overridable configuration.
DEFAULT_TICK_SPACING = {0.0001: 1, 0.0005: 10, 0.003: 60, 0.01: 200}
FEE_TIERS = tuple(sorted(DEFAULT_TICK_SPACING))


class PositionNotFoundError(KeyError):
    """Burn/collect of an unknown or already-burned position id."""


def tick_to_price(i: int, tick_bound: int = MAX_TICK) -> float:
    """Price of tick ``i``: 1.0001**i."""
    if abs(i) > tick_bound:
        raise ValueError(f"tick {i} outside |i| <= {tick_bound}")
    return TICK_BASE**i


def tick_to_sqrt_price(i: int) -> float:
    return TICK_BASE ** (i * 0.5)


def price_to_tick(s: float, tick_spacing: int = 1, tick_bound: int = MAX_TICK) -> int:
    """Largest tick i with i % tick_spacing == 0 and 1.0001**i <= s.

    The float log can land one grid step off near exact tick prices, so the
    candidate is corrected against the exact grid before flooring to spacing.
    """
    if not (s > 0.0) or not math.isfinite(s):
        raise ValueError(f"price must be positive and finite, got {s}")
    if tick_spacing < 1:
        raise ValueError(f"tick_spacing must be >= 1, got {tick_spacing}")
    i = math.floor(math.log(s) / math.log(TICK_BASE))
    while TICK_BASE ** (i + 1) <= s:
        i += 1
    while TICK_BASE**i > s:
        i -= 1
    i = (i // tick_spacing) * tick_spacing
    if abs(i) > tick_bound:
        raise ValueError(f"price {s} maps to tick {i} outside |i| <= {tick_bound}")
    return i


@dataclass(frozen=True)
class FeeTier:
    """Swap fee fraction plus the tick spacing it implies.

    The admissible fee set is {0.01%, 0.05%, 0.3%, 1%}. Tick spacing defaults
    to the conventional per-tier mapping but can be overridden.
    """

    fee: float
    tick_spacing: int = 0  # 0 means "use the default for this fee"

    def __post_init__(self) -> None:
        if self.fee not in DEFAULT_TICK_SPACING:
            raise ValueError(f"fee {self.fee} not in admissible tiers {FEE_TIERS}")
        if self.tick_spacing == 0:
            object.__setattr__(self, "tick_spacing", DEFAULT_TICK_SPACING[self.fee])
        if self.tick_spacing < 1:
            raise ValueError(f"tick_spacing must be >= 1, got {self.tick_spacing}")


@dataclass(frozen=True)
class PriceRange:
    """Price interval [lower, upper), 0 < lower < upper.

    Bounds may be numpy arrays (elementwise ranges) for vectorized analytics.
    """

    lower: float
    upper: float

    def __post_init__(self) -> None:
        lo = np.asarray(self.lower)
        up = np.asarray(self.upper)
        bad = (
            np.any(~np.isfinite(lo))
            or np.any(~np.isfinite(up))
            or np.any(lo <= 0.0)
            or np.any(up <= lo)
        )
        if bad:
            raise ValueError(f"need 0 < lower < upper, got [{self.lower}, {self.upper}]")

    def contains(self, price: float) -> bool:
        return self.lower <= price < self.upper


def virtual_reserves(liquidity, price):
    """Virtual reserves (x, y) = (L / sqrt(S), L * sqrt(S)); x*y = L^2, y/x = S."""
    _check_nonneg_liquidity(liquidity)
    _check_positive_price(price)
    sqrt_s = np.sqrt(price)
    return liquidity / sqrt_s, liquidity * sqrt_s


def position_reserves(liquidity, price, price_range: PriceRange | None = None):
    """Real token reserves of a range position at a given pool price.

    Below the range the position is all X, above it all Y, in between mixed:

        x = L * (1/sqrt(S') - 1/sqrt(S_u)),  y = L * (sqrt(S') - sqrt(S_l))

    with S' the price clamped into [S_l, S_u]. The clamp makes both branches
    agree exactly at the boundaries. ``price_range=None`` means full range
    (the reserves reduce to the virtual reserves).

    Accepts scalars or numpy arrays for ``liquidity`` and ``price``.
    """
    _check_nonneg_liquidity(liquidity)
    _check_positive_price(price)
    if price_range is None:
        return virtual_reserves(liquidity, price)
    s = np.minimum(np.maximum(price, price_range.lower), price_range.upper)
    sqrt_s = np.sqrt(s)
    sqrt_l = np.sqrt(price_range.lower)
    sqrt_u = np.sqrt(price_range.upper)
    x = liquidity * (1.0 / sqrt_s - 1.0 / sqrt_u)
    y = liquidity * (sqrt_s - sqrt_l)
    return x, y


def swap_exact_input_single_range(x: float, y: float, fee: float, delta_x: float) -> float:
    """Output of a fee-on-input swap against reserves (x, y) with no tick crossing.

        delta_y = y * (1-f) * delta_x / (x + (1-f) * delta_x)

    so the product (x + (1-f)*delta_x) * (y - delta_y) = x*y holds exactly on
    the fee-reduced input.
    """
    if not (x > 0.0 and y > 0.0):
        raise ValueError(f"reserves must be positive, got x={x}, y={y}")
    if delta_x < 0.0:
        raise ValueError(f"input must be non-negative, got {delta_x}")
    if not (0.0 <= fee < 1.0):
        raise ValueError(f"fee must be in [0, 1), got {fee}")
    eff = (1.0 - fee) * delta_x
    return y * eff / (x + eff)


def _check_nonneg_liquidity(liquidity) -> None:
    if np.any(np.asarray(liquidity) < 0):
        raise ValueError("liquidity must be non-negative")


def _check_positive_price(price) -> None:
    p = np.asarray(price)
    if np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("price must be positive and finite")


@dataclass
class _TickInfo:
    # liquidity_net is added to active liquidity when the price crosses the
    # tick upward; fee_outside_* follow the standard side-flip convention.
    liquidity_net: float = 0.0
    liquidity_gross: float = 0.0
    ref_count: int = 0
    fee_outside_x: float = 0.0
    fee_outside_y: float = 0.0


@dataclass
class Position:
    position_id: int
    tick_lower: int
    tick_upper: int
    liquidity: float
    deposit_x: float
    deposit_y: float
    entry_price: float
    fee_inside_last_x: float
    fee_inside_last_y: float
    owed_x: float = 0.0
    owed_y: float = 0.0
    collected_x: float = 0.0
    collected_y: float = 0.0

    @property
    def price_range(self) -> PriceRange:
        return PriceRange(tick_to_price(self.tick_lower), tick_to_price(self.tick_upper))


@dataclass
class SwapResult:
    token_in: str
    amount_in: float
    amount_used: float  # gross input actually consumed (== amount_in unless partial)
    amount_out: float
    fee_paid: float
    ticks_crossed: list[int]
    partial: bool

    @property
    def remainder(self) -> float:
        return self.amount_in - self.amount_used


@dataclass
class BurnResult:
    amount_x: float
    amount_y: float
    fees_x: float
    fees_y: float


class Pool:
    """Single concentrated-liquidity pool; all mutation is single-writer.

    State: current sqrt price and tick, a map of initialized ticks carrying
    signed liquidity deltas, the liquidity active at the current tick, and
    global fee-growth-per-unit-liquidity accumulators (one per token) with
    per-tick outside snapshots so each position accrues fees exactly while
    the price is inside its range.
    """

    def __init__(
        self,
        fee: float = 0.003,
        tick_spacing: int | None = None,
        initial_price: float = 1.0,
        tick_bound: int = MAX_TICK,
    ):
        self.fee_tier = FeeTier(fee, tick_spacing or 0)
        self.tick_bound = int(tick_bound)
        if not (initial_price > 0.0 and math.isfinite(initial_price)):
            raise ValueError(f"initial price must be positive, got {initial_price}")
        self.sqrt_price = math.sqrt(initial_price)
        self.tick = price_to_tick(initial_price, 1, self.tick_bound)
        self.ticks: dict[int, _TickInfo] = {}
        self._tick_index: list[int] = []  # sorted initialized tick indexes
        self.active_liquidity = 0.0
        self.fee_growth_x = 0.0
        self.fee_growth_y = 0.0
        self.total_fees_x = 0.0
        self.total_fees_y = 0.0
        self.positions: dict[int, Position] = {}
        self._next_position_id = 1

    # -- construction ------------------------------------------------------

    @classmethod
    def from_config(cls, config: dict | str) -> "Pool":
        """Build a pool from a JSON config file path or an already-loaded dict.

        Keys: fee (required), initial_price (required), tick_spacing
        (optional, defaults per fee tier), tick_bound (optional).
        """
        if isinstance(config, str):
            with open(config) as fh:
                config = json.load(fh)
        if not isinstance(config, dict):
            raise ValueError("pool config must be a JSON object")
        unknown = set(config) - {"fee", "tick_spacing", "initial_price", "tick_bound"}
        if unknown:
            raise ValueError(f"unknown pool config keys: {sorted(unknown)}")
        for key in ("fee", "initial_price"):
            if key not in config:
                raise ValueError(f"pool config missing required key '{key}'")
        return cls(
            fee=float(config["fee"]),
            tick_spacing=int(config["tick_spacing"]) if "tick_spacing" in config else None,
            initial_price=float(config["initial_price"]),
            tick_bound=int(config.get("tick_bound", MAX_TICK)),
        )

    # -- read-only queries -------------------------------------------------

    @property
    def fee(self) -> float:
        return self.fee_tier.fee

    @property
    def tick_spacing(self) -> int:
        return self.fee_tier.tick_spacing

    @property
    def price(self) -> float:
        return self.sqrt_price * self.sqrt_price

    def position(self, position_id: int) -> Position:
        try:
            return self.positions[position_id]
        except KeyError:
            raise PositionNotFoundError(position_id) from None

    def pending_fees(self, position_id: int) -> tuple[float, float]:
        """Fees accrued to a live position since it was last poked/collected."""
        pos = self.position(position_id)
        inside_x, inside_y = self._fee_growth_inside(pos.tick_lower, pos.tick_upper)
        dx = pos.owed_x + pos.liquidity * (inside_x - pos.fee_inside_last_x)
        dy = pos.owed_y + pos.liquidity * (inside_y - pos.fee_inside_last_y)
        return dx, dy

    def position_reserves_of(self, position_id: int) -> tuple[float, float]:
        pos = self.position(position_id)
        x, y = position_reserves(pos.liquidity, self.price, pos.price_range)
        return float(x), float(y)

    def sum_tick_deltas(self) -> float:
        return math.fsum(t.liquidity_net for t in self.ticks.values())

    def recompute_active_liquidity(self) -> float:
        """Active liquidity rebuilt from scratch (invariant cross-check)."""
        return math.fsum(
            info.liquidity_net for t, info in self.ticks.items() if t <= self.tick
        )

    # -- liquidity management ----------------------------------------------

    def mint(self, tick_lower: int, tick_upper: int, liquidity: float) -> int:
        """Add a position; returns its id. Deposit amounts are recorded on it."""
        self._validate_grid_tick(tick_lower)
        self._validate_grid_tick(tick_upper)
        if tick_lower >= tick_upper:
            raise ValueError(f"need tick_lower < tick_upper, got [{tick_lower}, {tick_upper})")
        if not (liquidity > 0.0 and math.isfinite(liquidity)):
            raise ValueError(f"liquidity must be positive, got {liquidity}")

        self._touch_tick(tick_lower, liquidity, upper=False)
        self._touch_tick(tick_upper, liquidity, upper=True)
        if tick_lower <= self.tick < tick_upper:
            self.active_liquidity += liquidity

        price_range = PriceRange(tick_to_price(tick_lower), tick_to_price(tick_upper))
        dep_x, dep_y = position_reserves(liquidity, self.price, price_range)
        dep_x, dep_y = float(dep_x), float(dep_y)
        inside_x, inside_y = self._fee_growth_inside(tick_lower, tick_upper)
        pid = self._next_position_id
        self._next_position_id += 1
        self.positions[pid] = Position(
            position_id=pid,
            tick_lower=tick_lower,
            tick_upper=tick_upper,
            liquidity=liquidity,
            deposit_x=dep_x,
            deposit_y=dep_y,
            entry_price=self.price,
            fee_inside_last_x=inside_x,
            fee_inside_last_y=inside_y,
        )
        return pid

    def mint_range(self, price_range: PriceRange, liquidity: float) -> int:
        """Mint with price bounds; both bounds must sit on the pool's tick grid."""
        lower = self._grid_tick_of_price(price_range.lower)
        upper = self._grid_tick_of_price(price_range.upper)
        return self.mint(lower, upper, liquidity)

    def burn(self, position_id: int) -> BurnResult:
        """Remove a position, returning its reserves and all uncollected fees."""
        pos = self.position(position_id)
        self._poke(pos)
        x, y = position_reserves(pos.liquidity, self.price, pos.price_range)
        x, y = float(x), float(y)
        fees_x, fees_y = pos.owed_x, pos.owed_y
        pos.collected_x += fees_x
        pos.collected_y += fees_y
        pos.owed_x = 0.0
        pos.owed_y = 0.0

        self._release_tick(pos.tick_lower, pos.liquidity, upper=False)
        self._release_tick(pos.tick_upper, pos.liquidity, upper=True)
        if pos.tick_lower <= self.tick < pos.tick_upper:
            self.active_liquidity -= pos.liquidity
            if self.active_liquidity < 0.0:  # float drift only
                self.active_liquidity = 0.0
        del self.positions[position_id]
        return BurnResult(x, y, fees_x, fees_y)

    def collect(self, position_id: int) -> tuple[float, float]:
        """Withdraw accrued fees without touching the liquidity."""
        pos = self.position(position_id)
        self._poke(pos)
        fees_x, fees_y = pos.owed_x, pos.owed_y
        pos.collected_x += fees_x
        pos.collected_y += fees_y
        pos.owed_x = 0.0
        pos.owed_y = 0.0
        return fees_x, fees_y

    # -- swaps ---------------------------------------------------------------

    def swap(self, token_in: str, amount_in: float) -> SwapResult:
        """Exact-input swap across ticks.

        Executes against the current interval's virtual reserves until the
        price reaches the next initialized tick, crosses it (adjusting active
        liquidity by the tick's delta, flipping its fee snapshots), and
        repeats until the input is spent. The fee is charged on the input and
        credited per unit of the liquidity active while each slice executes.
        If initialized liquidity runs out the swap stops and the unconsumed
        remainder is flagged on the result rather than raising.
        """
        if token_in not in ("x", "y"):
            raise ValueError(f"token_in must be 'x' or 'y', got {token_in!r}")
        if not (amount_in >= 0.0 and math.isfinite(amount_in)):
            raise ValueError(f"amount_in must be non-negative, got {amount_in}")

        one_minus = 1.0 - self.fee
        remaining_eff = amount_in * one_minus
        out = 0.0
        used = 0.0
        fee_paid = 0.0
        crossed: list[int] = []
        down = token_in == "x"

        while remaining_eff > 0.0:
            boundary = self._next_tick_down() if down else self._next_tick_up()
            if boundary is None:
                break  # no initialized liquidity ahead: partial fill
            sqrt_b = tick_to_sqrt_price(boundary)
            liq = self.active_liquidity
            if liq > 0.0:
                if down:
                    to_boundary = liq * (1.0 / sqrt_b - 1.0 / self.sqrt_price)
                else:
                    to_boundary = liq * (sqrt_b - self.sqrt_price)
                if remaining_eff < to_boundary:
                    sp = self.sqrt_price
                    if down:
                        sp_new = liq * sp / (liq + sp * remaining_eff)
                        out += liq * (sp - sp_new)
                    else:
                        sp_new = sp + remaining_eff / liq
                        out += liq * (1.0 / sp - 1.0 / sp_new)
                    gross = remaining_eff / one_minus
                    used += gross
                    fee_paid += gross - remaining_eff
                    self._credit_fee(token_in, gross - remaining_eff, liq)
                    self.sqrt_price = sp_new
                    self._retick_interior(boundary, down)
                    remaining_eff = 0.0
                    break
                # consume the whole interval up to the boundary
                if down:
                    out += liq * (self.sqrt_price - sqrt_b)
                else:
                    out += liq * (1.0 / self.sqrt_price - 1.0 / sqrt_b)
                gross = to_boundary / one_minus
                used += gross
                fee_paid += gross - to_boundary
                self._credit_fee(token_in, gross - to_boundary, liq)
                remaining_eff -= to_boundary
            # reached the boundary (or bridged an empty interval): cross it
            self.sqrt_price = sqrt_b
            self._cross(boundary, down)
            crossed.append(boundary)

        partial = remaining_eff > 0.0
        if token_in == "x":
            self.total_fees_x += fee_paid
        else:
            self.total_fees_y += fee_paid
        return SwapResult(
            token_in=token_in,
            amount_in=amount_in,
            amount_used=used if partial else amount_in,
            amount_out=out,
            fee_paid=fee_paid,
            ticks_crossed=crossed,
            partial=partial,
        )

    # -- internals -----------------------------------------------------------

    def _validate_grid_tick(self, tick: int) -> None:
        if tick % self.tick_spacing != 0:
            raise ValueError(f"tick {tick} not a multiple of spacing {self.tick_spacing}")
        if abs(tick) > self.tick_bound:
            raise ValueError(f"tick {tick} outside |i| <= {self.tick_bound}")

    def _grid_tick_of_price(self, price: float) -> int:
        tick = price_to_tick(price, self.tick_spacing, self.tick_bound)
        grid_price = tick_to_price(tick, self.tick_bound)
        if not math.isclose(grid_price, price, rel_tol=1e-9):
            raise ValueError(f"price {price} is not on the tick grid (spacing {self.tick_spacing})")
        return tick

    def _touch_tick(self, tick: int, liquidity: float, upper: bool) -> None:
        info = self.ticks.get(tick)
        if info is None:
            info = _TickInfo()
            if tick <= self.tick:
                info.fee_outside_x = self.fee_growth_x
                info.fee_outside_y = self.fee_growth_y
            self.ticks[tick] = info
            bisect.insort(self._tick_index, tick)
        info.liquidity_net += -liquidity if upper else liquidity
        info.liquidity_gross += liquidity
        info.ref_count += 1

    def _release_tick(self, tick: int, liquidity: float, upper: bool) -> None:
        info = self.ticks[tick]
        info.liquidity_net -= -liquidity if upper else liquidity
        info.liquidity_gross -= liquidity
        info.ref_count -= 1
        if info.ref_count == 0:
            del self.ticks[tick]
            self._tick_index.remove(tick)

    def _next_tick_down(self) -> int | None:
        idx = bisect.bisect_right(self._tick_index, self.tick) - 1
        return self._tick_index[idx] if idx >= 0 else None

    def _next_tick_up(self) -> int | None:
        idx = bisect.bisect_right(self._tick_index, self.tick)
        return self._tick_index[idx] if idx < len(self._tick_index) else None

    def _cross(self, tick: int, down: bool) -> None:
        info = self.ticks[tick]
        info.fee_outside_x = self.fee_growth_x - info.fee_outside_x
        info.fee_outside_y = self.fee_growth_y - info.fee_outside_y
        if down:
            self.active_liquidity -= info.liquidity_net
            self.tick = tick - 1
        else:
            self.active_liquidity += info.liquidity_net
            self.tick = tick
        if self.active_liquidity < 0.0:  # float drift only
            self.active_liquidity = 0.0

    def _retick_interior(self, boundary: int, down: bool) -> None:
        # interior move: the price did not reach `boundary`, so the true tick
        # stays strictly on this side of it; clamp away any log rounding
        tick = price_to_tick(self.price, 1, self.tick_bound)
        if down:
            self.tick = min(max(tick, boundary), self.tick)
        else:
            self.tick = max(min(tick, boundary - 1), self.tick)

    def _credit_fee(self, token_in: str, fee_amount: float, liquidity: float) -> None:
        if fee_amount <= 0.0 or liquidity <= 0.0:
            return
        if token_in == "x":
            self.fee_growth_x += fee_amount / liquidity
        else:
            self.fee_growth_y += fee_amount / liquidity

    def _fee_growth_inside(self, tick_lower: int, tick_upper: int) -> tuple[float, float]:
        lo = self.ticks[tick_lower]
        up = self.ticks[tick_upper]
        if self.tick >= tick_lower:
            below_x, below_y = lo.fee_outside_x, lo.fee_outside_y
        else:
            below_x = self.fee_growth_x - lo.fee_outside_x
            below_y = self.fee_growth_y - lo.fee_outside_y
        if self.tick < tick_upper:
            above_x, above_y = up.fee_outside_x, up.fee_outside_y
        else:
            above_x = self.fee_growth_x - up.fee_outside_x
            above_y = self.fee_growth_y - up.fee_outside_y
        return self.fee_growth_x - below_x - above_x, self.fee_growth_y - below_y - above_y

    def _poke(self, pos: Position) -> None:
        inside_x, inside_y = self._fee_growth_inside(pos.tick_lower, pos.tick_upper)
        pos.owed_x += pos.liquidity * (inside_x - pos.fee_inside_last_x)
        pos.owed_y += pos.liquidity * (inside_y - pos.fee_inside_last_y)
        pos.fee_inside_last_x = inside_x
        pos.fee_inside_last_y = inside_y
