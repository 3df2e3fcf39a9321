"""Geometric Brownian motion price paths and in-the-money statistics.

Paths use the exact lognormal solution S(t) = S0 * exp((mu - sigma^2/2) t
+ sigma W(t)), stepped daily, so there is no discretization bias. Each path
draws from its own seeded substream (spawned off the master seed by path
index), so results are reproducible and independent of how the work is
batched. ITM statistics are computed on log price relatives, which makes
them exactly invariant under rescaling of the start price.

Time unit is days; rates are per year with 365 days per year.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DAYS_PER_YEAR = 365.0
DEFAULT_ALPHA_GRID_BOUNDS = (1.01, 20.0)
DEFAULT_ALPHA_GRID_POINTS = 200


@dataclass(frozen=True)
class GbmParams:
    """Drift/volatility (annualized), horizon and step in days, path count, seed."""

    mu: float = 0.0
    sigma: float = 0.7
    horizon_days: int = 30
    step_days: float = 1.0
    n_paths: int = 40000
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")
        if self.horizon_days < 1:
            raise ValueError(f"horizon_days must be >= 1, got {self.horizon_days}")
        if not (self.step_days > 0.0):
            raise ValueError(f"step_days must be positive, got {self.step_days}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_days / self.step_days))


@dataclass(frozen=True)
class WidthSpec:
    """Symmetric range width: bounds are S0/alpha and alpha*S0."""

    alpha: float

    def __post_init__(self) -> None:
        if not (self.alpha > 1.0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be > 1, got {self.alpha}")

    def bounds(self, s0: float) -> tuple[float, float]:
        return s0 / self.alpha, self.alpha * s0


@dataclass(frozen=True)
class PricePaths:
    """Bundle of simulated paths: times in days, log(S(t)/S0) per path, and S0."""

    times: np.ndarray  # shape (n_steps + 1,)
    log_rel: np.ndarray  # shape (n_paths, n_steps + 1), column 0 is zero
    s0: float

    def __post_init__(self) -> None:
        if self.log_rel.ndim != 2 or self.times.ndim != 1:
            raise ValueError("log_rel must be 2-d and times 1-d")
        if self.log_rel.shape[1] != self.times.shape[0]:
            raise ValueError("times length must match the per-path sample count")
        if not (self.s0 > 0.0):
            raise ValueError(f"s0 must be positive, got {self.s0}")

    @property
    def n_paths(self) -> int:
        return self.log_rel.shape[0]

    @property
    def prices(self) -> np.ndarray:
        return self.s0 * np.exp(self.log_rel)


def simulate_paths(params: GbmParams, s0: float = 1.0) -> PricePaths:
    """Simulate lognormal daily price paths.

    Per step: ln S(t+dt) - ln S(t) ~ Normal((mu - sigma^2/2) dt, sigma^2 dt),
    independent across steps and paths. Path i draws from substream i of the
    master seed, so the result is bit-identical for a given (seed, n_paths,
    horizon) regardless of batching.
    """
    if not (s0 > 0.0 and math.isfinite(s0)):
        raise ValueError(f"s0 must be positive, got {s0}")
    n_steps = params.n_steps
    dt_years = params.step_days / DAYS_PER_YEAR
    drift = (params.mu - 0.5 * params.sigma**2) * dt_years
    scale = params.sigma * math.sqrt(dt_years)

    increments = np.empty((params.n_paths, n_steps))
    for i, child in enumerate(np.random.SeedSequence(params.seed).spawn(params.n_paths)):
        rng = np.random.Generator(np.random.PCG64(child))
        increments[i] = rng.standard_normal(n_steps)
    log_rel = np.empty((params.n_paths, n_steps + 1))
    log_rel[:, 0] = 0.0
    np.cumsum(drift + scale * increments, axis=1, out=log_rel[:, 1:])

    times = np.arange(n_steps + 1, dtype=float) * params.step_days
    return PricePaths(times=times, log_rel=log_rel, s0=s0)


def p_itm(
    paths: PricePaths, width: WidthSpec, first_passage: bool = False
) -> list[tuple[float, float]]:
    """Probability the price is inside (S0/alpha, alpha*S0) at each time.

    The default is the marginal (point-in-time) probability: the fraction of
    paths strictly inside the band at time t, regardless of earlier
    excursions. ``first_passage=True`` instead counts paths that have never
    left the band up to t ("remained in range"), for sensitivity analysis.
    """
    if paths.n_paths == 0:
        raise ValueError("empty path set")
    inside = np.abs(paths.log_rel) < math.log(width.alpha)
    if first_passage:
        inside = np.logical_and.accumulate(inside, axis=1)
    probs = inside.mean(axis=0)
    return list(zip(paths.times.tolist(), probs.tolist()))


def expected_time_itm(
    paths: PricePaths, width: WidthSpec, first_passage: bool = False
) -> list[tuple[float, float]]:
    """Expected fraction of elapsed time spent in range, per elapsed time t_n.

    Left-endpoint Riemann sum of the ITM probability over the daily grid,
    normalized by t_n, so the value lives in [0, 1] and equals 1 at the first
    step (the price starts inside the band).
    """
    pairs = p_itm(paths, width, first_passage)
    probs = np.array([p for _, p in pairs])
    n = probs.size - 1
    if n < 1:
        raise ValueError("need at least one step to accumulate time in range")
    fractions = np.cumsum(probs[:-1]) / np.arange(1, n + 1)
    return list(zip(paths.times[1:].tolist(), fractions.tolist()))


def fee_proxy(paths: PricePaths, width: WidthSpec, t_days: float) -> float:
    """Unit-free fee proxy: expected time-in-range fraction at t divided by alpha.

    Under a locally uniform liquidity distribution the fee take of a position
    scales with its time in range and inversely with its width, so the proxy
    orders widths; only its argmax is meaningful.
    """
    pairs = expected_time_itm(paths, width)
    for t, frac in pairs:
        if math.isclose(t, t_days, rel_tol=1e-12, abs_tol=1e-9):
            return frac / width.alpha
    raise ValueError(f"t={t_days} is not on the simulated time grid")


def fee_proxy_surface(
    paths: PricePaths, alphas: np.ndarray, t_horizons: list[float]
) -> dict[float, list[tuple[float, float]]]:
    """(alpha, proxy) tables for several horizons over one common path set.

    Scans each alpha once and reads off every horizon, so it is the cheap way
    to build the width-selection curves.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or alphas.size == 0 or np.any(alphas <= 1.0):
        raise ValueError("alphas must be a non-empty 1-d array of values > 1")
    idx = [_time_index(paths, t) for t in t_horizons]
    abs_log = np.abs(paths.log_rel)
    n = paths.times.size - 1
    steps = np.arange(1, n + 1)
    curves: dict[float, list[tuple[float, float]]] = {float(t): [] for t in t_horizons}
    for a in alphas:
        probs = (abs_log < math.log(a)).mean(axis=0)
        fractions = np.cumsum(probs[:-1]) / steps
        for t, i in zip(t_horizons, idx):
            curves[float(t)].append((float(a), fractions[i] / a))
    return curves


def fee_proxy_curve(
    paths: PricePaths, alphas: np.ndarray, t_days: float
) -> list[tuple[float, float]]:
    """(alpha, proxy) table at a fixed horizon, common paths across alphas."""
    return fee_proxy_surface(paths, alphas, [t_days])[float(t_days)]


def _time_index(paths: PricePaths, t_days: float) -> int:
    # index into the expected-time grid paths.times[1:]
    for i, t in enumerate(paths.times[1:]):
        if math.isclose(t, t_days, rel_tol=1e-12, abs_tol=1e-9):
            return i
    raise ValueError(f"t={t_days} is not on the simulated time grid")


def itm_probability(alpha: float, t_days: float, sigma: float, mu: float = 0.0) -> float:
    """Closed-form lognormal band probability P(S0/alpha < S(t) < alpha*S0).

    ln(S(t)/S0) ~ Normal((mu - sigma^2/2) t, sigma^2 t) with t in years.
    """
    if not (alpha > 1.0):
        raise ValueError(f"alpha must be > 1, got {alpha}")
    if t_days < 0.0:
        raise ValueError(f"t must be non-negative, got {t_days}")
    if t_days == 0.0:
        return 1.0
    t = t_days / DAYS_PER_YEAR
    spread = sigma * math.sqrt(t)
    mean = (mu - 0.5 * sigma**2) * t
    lna = math.log(alpha)
    return _norm_cdf((lna - mean) / spread) - _norm_cdf((-lna - mean) / spread)


def default_alpha_grid(
    lo: float = DEFAULT_ALPHA_GRID_BOUNDS[0],
    hi: float = DEFAULT_ALPHA_GRID_BOUNDS[1],
    n: int = DEFAULT_ALPHA_GRID_POINTS,
) -> np.ndarray:
    if not (1.0 < lo < hi) or n < 2:
        raise ValueError(f"need 1 < lo < hi and n >= 2, got lo={lo}, hi={hi}, n={n}")
    return np.exp(np.linspace(math.log(lo), math.log(hi), n))


def optimal_width(
    params: GbmParams,
    t_horizons: list[float],
    alphas: np.ndarray | None = None,
    s0: float = 1.0,
) -> list[tuple[float, float]]:
    """Width maximizing the fee proxy for each horizon, by grid search.

    One path set (common random numbers) is shared by every alpha, so the
    argmax is deterministic for a given seed. Returns (T, alpha_star) pairs.
    """
    if not t_horizons:
        raise ValueError("horizon list must not be empty")
    for t in t_horizons:
        if not (0.0 < t <= params.horizon_days):
            raise ValueError(f"horizon {t} not in (0, {params.horizon_days}] days")
    if alphas is None:
        alphas = default_alpha_grid()
    alphas = np.asarray(alphas, dtype=float)

    paths = simulate_paths(params, s0)
    curves = fee_proxy_surface(paths, alphas, list(t_horizons))
    result = []
    for t in t_horizons:
        curve = curves[float(t)]
        best = int(np.argmax([proxy for _, proxy in curve]))
        result.append((float(t), curve[best][0]))
    return result


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
