"""Concentrated-liquidity CPMM simulator and LP risk/return analytics."""

from .amm import (
    FeeTier,
    Pool,
    PositionNotFoundError,
    PriceRange,
    position_reserves,
    price_to_tick,
    swap_exact_input_single_range,
    tick_to_price,
    virtual_reserves,
)
from .analytics import hold_value, il_curve, il_v2, il_v3, position_return, position_value
from .gbm import (
    GbmParams,
    PricePaths,
    WidthSpec,
    expected_time_itm,
    fee_proxy,
    itm_probability,
    optimal_width,
    p_itm,
    simulate_paths,
)
from .replay import PoolEvent, parse_events, pool_stats, position_risk_rows, replay
from .risk import cvar, realized_volatility, return_stats

__version__ = "0.1.0"

__all__ = [
    "FeeTier",
    "GbmParams",
    "Pool",
    "PoolEvent",
    "PositionNotFoundError",
    "PriceRange",
    "PricePaths",
    "WidthSpec",
    "cvar",
    "expected_time_itm",
    "fee_proxy",
    "hold_value",
    "il_curve",
    "il_v2",
    "il_v3",
    "itm_probability",
    "optimal_width",
    "p_itm",
    "parse_events",
    "pool_stats",
    "position_reserves",
    "position_return",
    "position_risk_rows",
    "position_value",
    "price_to_tick",
    "realized_volatility",
    "replay",
    "return_stats",
    "simulate_paths",
    "swap_exact_input_single_range",
    "tick_to_price",
    "virtual_reserves",
    "__version__",
]
