"""Event-log replay: drive a pool from mint/burn/swap/collect events and
build per-position daily ledgers plus pool-level statistics.

Event schema (CSV with header, or JSON lines with the same keys):

    seq, unix_time, kind, position_id, tick_lower, tick_upper, liquidity,
    amount_x, amount_y, swap_in_token, swap_in_amount

* ``seq``: integer; rows must be sorted by (unix_time, seq), strictly.
* ``kind``: one of mint / burn / swap / collect.
* mint rows carry position_id, tick_lower, tick_upper, liquidity (> 0).
  Deposit amounts are recomputed by the simulator; logged amounts on mint
  rows are ignored. A burn removes the whole position.
* swap rows carry swap_in_token ('x' or 'y') and swap_in_amount. The input
  amount is trusted; the output is recomputed, and when the opposite-side
  amount is logged the relative mismatch is reported per event (drift)
  instead of failing the replay.
* burn/collect rows reference a previously minted, still-live position_id.

Day boundaries default to UTC midnights; positions are valued and marked
in/out of range at each boundary ("end of day"), which drives the daily
return series (per-day total-return decomposition) and the ITM day counts.
A per-event accounting of in-range seconds is kept alongside for
sensitivity checks.
"""

from __future__ import annotations

import json
import os
import re
import statistics
from dataclasses import dataclass, field

from .amm import Pool, position_reserves
from .risk import cvar as _cvar, realized_volatility, return_stats
from .tables import read_csv, write_csv

LEDGER_SCHEMA = "clamm-ledger v1"

DAY_SECONDS = 86400
EVENT_KINDS = ("mint", "burn", "swap", "collect")
EVENT_COLUMNS = (
    "seq",
    "unix_time",
    "kind",
    "position_id",
    "tick_lower",
    "tick_upper",
    "liquidity",
    "amount_x",
    "amount_y",
    "swap_in_token",
    "swap_in_amount",
)
_ID_PATTERN = re.compile(r"^[A-Za-z0-9_.-]+$")


class EventParseError(ValueError):
    """Malformed event row; carries the 1-based line number and field name."""

    def __init__(self, message: str, line: int, fieldname: str | None = None):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.fieldname = fieldname


class EventOrderError(EventParseError):
    """Events out of (unix_time, seq) order, or a reference to an unknown id."""


class ReplayExecutionError(RuntimeError):
    """Pool error while applying an event; carries the event seq."""

    def __init__(self, message: str, seq: int):
        super().__init__(f"event seq {seq}: {message}")
        self.seq = seq


@dataclass(frozen=True)
class PoolEvent:
    seq: int
    unix_time: int
    kind: str
    position_id: str | None = None
    tick_lower: int | None = None
    tick_upper: int | None = None
    liquidity: float | None = None
    amount_x: float | None = None
    amount_y: float | None = None
    swap_in_token: str | None = None
    swap_in_amount: float | None = None


def parse_events(source) -> list[PoolEvent]:
    """Parse and validate an event stream.

    ``source`` is a path, an open text file, or an iterable of lines. The
    format is auto-detected: lines starting with '{' are JSON objects,
    otherwise the first line is taken as a CSV header. Comment lines
    starting with '#' and blank lines are skipped.
    """
    if isinstance(source, str):
        with open(source) as fh:
            return parse_events(fh)
    events: list[PoolEvent] = []
    header: list[str] | None = None
    live: set[str] = set()
    seen: set[str] = set()
    prev_key: tuple[int, int] | None = None

    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("{"):
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise EventParseError(f"invalid JSON: {err.msg}", lineno) from None
            if not isinstance(record, dict):
                raise EventParseError("JSON event must be an object", lineno)
        else:
            cells = [c.strip() for c in line.split(",")]
            if header is None:
                missing = [c for c in EVENT_COLUMNS if c not in cells]
                if missing:
                    raise EventParseError(
                        f"header missing columns {missing}", lineno, missing[0]
                    )
                header = cells
                continue
            if len(cells) != len(header):
                raise EventParseError(
                    f"expected {len(header)} cells, got {len(cells)}", lineno
                )
            record = dict(zip(header, cells))
        event = _validate_event(record, lineno)

        key = (event.unix_time, event.seq)
        if prev_key is not None and key <= prev_key:
            raise EventOrderError(
                f"event (time={event.unix_time}, seq={event.seq}) not after "
                f"(time={prev_key[0]}, seq={prev_key[1]})",
                lineno,
                "unix_time",
            )
        prev_key = key

        if event.kind == "mint":
            if event.position_id in seen:
                raise EventOrderError(
                    f"position id {event.position_id!r} reused", lineno, "position_id"
                )
            seen.add(event.position_id)
            live.add(event.position_id)
        elif event.kind in ("burn", "collect"):
            if event.position_id not in live:
                raise EventOrderError(
                    f"{event.kind} of unknown or closed position "
                    f"{event.position_id!r}",
                    lineno,
                    "position_id",
                )
            if event.kind == "burn":
                live.remove(event.position_id)
        events.append(event)
    return events


def _strict_int(value) -> int:
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"not an integer: {value}")
    return int(value)


def _validate_event(record: dict, lineno: int) -> PoolEvent:
    def get(name, caster, required, validator=None, message=""):
        value = record.get(name)
        if value is None or value == "":
            if required:
                raise EventParseError(f"missing required field '{name}'", lineno, name)
            return None
        try:
            value = caster(value)
        except (TypeError, ValueError):
            raise EventParseError(
                f"field '{name}': cannot parse {value!r}", lineno, name
            ) from None
        if validator is not None and not validator(value):
            raise EventParseError(f"field '{name}': {message}, got {value!r}", lineno, name)
        return value

    kind = get("kind", str, True, lambda k: k in EVENT_KINDS, f"must be one of {EVENT_KINDS}")
    seq = get("seq", _strict_int, True)
    unix_time = get("unix_time", _strict_int, True, lambda t: t >= 0, "must be >= 0")
    needs_id = kind in ("mint", "burn", "collect")
    position_id = get(
        "position_id",
        str,
        needs_id,
        lambda s: bool(_ID_PATTERN.match(s)),
        "must match [A-Za-z0-9_.-]+",
    )
    tick_lower = get("tick_lower", _strict_int, kind == "mint")
    tick_upper = get("tick_upper", _strict_int, kind == "mint")
    liquidity = get("liquidity", float, kind == "mint", lambda v: v > 0, "must be > 0")
    amount_x = get("amount_x", float, False, lambda v: v >= 0, "must be >= 0")
    amount_y = get("amount_y", float, False, lambda v: v >= 0, "must be >= 0")
    swap_in_token = get(
        "swap_in_token", str, kind == "swap", lambda s: s in ("x", "y"), "must be 'x' or 'y'"
    )
    swap_in_amount = get(
        "swap_in_amount", float, kind == "swap", lambda v: v >= 0, "must be >= 0"
    )
    if kind == "mint" and tick_lower >= tick_upper:
        raise EventParseError(
            f"mint needs tick_lower < tick_upper, got [{tick_lower}, {tick_upper})",
            lineno,
            "tick_lower",
        )
    return PoolEvent(
        seq=seq,
        unix_time=unix_time,
        kind=kind,
        position_id=position_id,
        tick_lower=tick_lower,
        tick_upper=tick_upper,
        liquidity=liquidity,
        amount_x=amount_x,
        amount_y=amount_y,
        swap_in_token=swap_in_token,
        swap_in_amount=swap_in_amount,
    )


@dataclass
class LedgerRow:
    day: int
    unix_time: int
    price: float
    value: float
    hold_value: float  # deposit tokens marked at this day's price
    fees_x: float  # cumulative, accrued + collected
    fees_y: float
    itm: bool
    daily_return: float


@dataclass
class PositionLedger:
    position_id: str
    tick_lower: int
    tick_upper: int
    liquidity: float
    entry_time: int
    entry_price: float
    deposit_x: float
    deposit_y: float
    rows: list[LedgerRow] = field(default_factory=list)
    itm_days: int = 0
    lifetime_days: int = 0
    itm_seconds: float = 0.0
    live_seconds: float = 0.0
    closed: bool = False
    close_time: int | None = None
    close_price: float | None = None
    returned_x: float | None = None
    returned_y: float | None = None
    fees_x_total: float = 0.0  # collected so far; final total once closed
    fees_y_total: float = 0.0
    # previous-snapshot markers for the day-over-day return
    _prev_price: float = 0.0
    _prev_fees_x: float = 0.0
    _prev_fees_y: float = 0.0

    @property
    def width_bps(self) -> int:
        # one tick is one basis point of price
        return self.tick_upper - self.tick_lower

    @property
    def deposit_value(self) -> float:
        return self.entry_price * self.deposit_x + self.deposit_y

    @property
    def daily_returns(self) -> list[float]:
        return [r.daily_return for r in self.rows]

    @property
    def itm_fraction(self) -> float:
        return self.itm_days / self.lifetime_days if self.lifetime_days else float("nan")

    @property
    def first_day(self) -> int | None:
        return self.rows[0].day if self.rows else None

    @property
    def last_day(self) -> int | None:
        return self.rows[-1].day if self.rows else None


@dataclass
class DailyPoolRow:
    day: int
    unix_time: int
    price: float
    volume_y: float  # swap inputs valued in Y at the pre-swap price
    swap_count: int


@dataclass
class SwapDrift:
    seq: int
    unix_time: int
    token_in: str
    amount_in: float
    logged_out: float
    simulated_out: float
    rel_drift: float


@dataclass
class ReplayResult:
    pool: Pool
    ledgers: dict[str, PositionLedger]
    daily: list[DailyPoolRow]
    swap_drifts: list[SwapDrift]
    partial_fill_seqs: list[int]
    day_anchor: str
    pool_id_map: dict[str, int] = field(default_factory=dict)

    def fee_conservation(self) -> dict[str, float]:
        """Trader fees paid vs fees credited to positions plus unclaimed."""
        credited_x = sum(led.fees_x_total for led in self.ledgers.values())
        credited_y = sum(led.fees_y_total for led in self.ledgers.values())
        unclaimed_x = unclaimed_y = 0.0
        for log_id, pid in self.pool_id_map.items():
            if not self.ledgers[log_id].closed:
                px, py = self.pool.pending_fees(pid)
                unclaimed_x += px
                unclaimed_y += py
        return {
            "paid_x": self.pool.total_fees_x,
            "paid_y": self.pool.total_fees_y,
            "credited_x": credited_x + unclaimed_x,
            "credited_y": credited_y + unclaimed_y,
            "unclaimed_x": unclaimed_x,
            "unclaimed_y": unclaimed_y,
        }


def replay(
    events: list[PoolEvent],
    pool_config: Pool | dict | str,
    day_anchor: str = "midnight",
) -> ReplayResult:
    """Apply an ordered event sequence to a fresh pool and build the ledgers.

    ``pool_config`` may be a Pool (mutated in place), a config dict, or a
    config file path. ``day_anchor`` is 'midnight' (UTC midnights after the
    first event) or 'first-event' (24h periods from the first event).
    """
    if day_anchor not in ("midnight", "first-event"):
        raise ValueError(f"day_anchor must be 'midnight' or 'first-event', got {day_anchor!r}")
    pool = pool_config if isinstance(pool_config, Pool) else Pool.from_config(pool_config)

    ledgers: dict[str, PositionLedger] = {}
    pool_ids: dict[str, int] = {}
    live: dict[str, PositionLedger] = {}
    daily: list[DailyPoolRow] = []
    drifts: list[SwapDrift] = []
    partial: list[int] = []

    result = ReplayResult(
        pool=pool,
        ledgers=ledgers,
        daily=daily,
        swap_drifts=drifts,
        partial_fill_seqs=partial,
        day_anchor=day_anchor,
        pool_id_map=pool_ids,
    )
    if not events:
        return result

    t0 = events[0].unix_time
    if day_anchor == "midnight":
        next_boundary = (t0 // DAY_SECONDS) * DAY_SECONDS + DAY_SECONDS
    else:
        next_boundary = t0 + DAY_SECONDS
    day = 0
    last_time = t0
    volume_y = 0.0
    swap_count = 0

    def snapshot(boundary_time: int) -> None:
        nonlocal volume_y, swap_count
        price = pool.price
        for led in live.values():
            pid = pool_ids[led.position_id]
            pos = pool.positions[pid]
            x, y = position_reserves(led.liquidity, price, pos.price_range)
            value = price * x + y
            hold_cum = price * led.deposit_x + led.deposit_y
            pend_x, pend_y = pool.pending_fees(pid)
            fees_x = led.fees_x_total + pend_x
            fees_y = led.fees_y_total + pend_y
            itm = pos.tick_lower <= pool.tick < pos.tick_upper
            x_prev, y_prev = position_reserves(led.liquidity, led._prev_price, pos.price_range)
            hold_day = price * x_prev + y_prev
            fee_day = (fees_x - led._prev_fees_x) * price + (fees_y - led._prev_fees_y)
            daily_return = (value + fee_day - hold_day) / hold_day
            led.rows.append(
                LedgerRow(
                    day=day,
                    unix_time=boundary_time,
                    price=price,
                    value=value,
                    hold_value=hold_cum,
                    fees_x=fees_x,
                    fees_y=fees_y,
                    itm=itm,
                    daily_return=daily_return,
                )
            )
            led.lifetime_days += 1
            led.itm_days += int(itm)
            led._prev_price = price
            led._prev_fees_x = fees_x
            led._prev_fees_y = fees_y
        daily.append(
            DailyPoolRow(
                day=day,
                unix_time=boundary_time,
                price=price,
                volume_y=volume_y,
                swap_count=swap_count,
            )
        )
        volume_y = 0.0
        swap_count = 0

    def elapse(dt: float) -> None:
        if dt <= 0:
            return
        for led in live.values():
            led.live_seconds += dt
            if led.tick_lower <= pool.tick < led.tick_upper:
                led.itm_seconds += dt

    for ev in events:
        while ev.unix_time >= next_boundary:
            snapshot(next_boundary)
            next_boundary += DAY_SECONDS
            day += 1
        elapse(ev.unix_time - last_time)
        last_time = ev.unix_time
        try:
            if ev.kind == "mint":
                pid = pool.mint(ev.tick_lower, ev.tick_upper, ev.liquidity)
                pos = pool.positions[pid]
                led = PositionLedger(
                    position_id=ev.position_id,
                    tick_lower=ev.tick_lower,
                    tick_upper=ev.tick_upper,
                    liquidity=ev.liquidity,
                    entry_time=ev.unix_time,
                    entry_price=pool.price,
                    deposit_x=pos.deposit_x,
                    deposit_y=pos.deposit_y,
                )
                led._prev_price = pool.price
                ledgers[ev.position_id] = led
                pool_ids[ev.position_id] = pid
                live[ev.position_id] = led
            elif ev.kind == "swap":
                price_before = pool.price
                res = pool.swap(ev.swap_in_token, ev.swap_in_amount)
                if res.partial:
                    partial.append(ev.seq)
                volume_y += (
                    res.amount_used
                    if ev.swap_in_token == "y"
                    else res.amount_used * price_before
                )
                swap_count += 1
                logged_out = ev.amount_y if ev.swap_in_token == "x" else ev.amount_x
                if logged_out is not None:
                    denom = max(abs(logged_out), 1e-300)
                    drifts.append(
                        SwapDrift(
                            seq=ev.seq,
                            unix_time=ev.unix_time,
                            token_in=ev.swap_in_token,
                            amount_in=ev.swap_in_amount,
                            logged_out=logged_out,
                            simulated_out=res.amount_out,
                            rel_drift=abs(res.amount_out - logged_out) / denom,
                        )
                    )
            elif ev.kind == "burn":
                led = live.pop(ev.position_id)
                burn_res = pool.burn(pool_ids[ev.position_id])
                led.closed = True
                led.close_time = ev.unix_time
                led.close_price = pool.price
                led.returned_x = burn_res.amount_x
                led.returned_y = burn_res.amount_y
                led.fees_x_total += burn_res.fees_x
                led.fees_y_total += burn_res.fees_y
            else:  # collect
                led = live[ev.position_id]
                fx, fy = pool.collect(pool_ids[ev.position_id])
                led.fees_x_total += fx
                led.fees_y_total += fy
        except (ValueError, KeyError) as err:
            raise ReplayExecutionError(str(err), ev.seq) from err
    return result


def pool_stats(
    result: ReplayResult, window_days: int = 30, min_value: float = 1e-4
) -> list[dict]:
    """Per-day aggregate statistics over positions and trading activity.

    Size/lifetime/ITM/width aggregates cover the positions live at each day
    boundary whose deposit value clears ``min_value`` (dust positions are
    replayed but excluded from reports). Volume and realized volatility are
    computed over the trailing window of that many days.
    """
    if not result.ledgers:
        raise ValueError("no positions to aggregate")
    if window_days < 1:
        raise ValueError(f"window_days must be >= 1, got {window_days}")
    reportable = [led for led in result.ledgers.values() if led.deposit_value >= min_value]
    rows: list[dict] = []
    closes: list[float] = []
    volumes: list[float] = []
    for day_row in result.daily:
        d = day_row.day
        closes.append(day_row.price)
        volumes.append(day_row.volume_y)
        active = [
            led
            for led in reportable
            if led.first_day is not None and led.first_day <= d <= led.last_day
        ]
        sizes = [led.deposit_value for led in active]
        lifetimes = [float(d - led.first_day + 1) for led in active]
        itm_fracs = []
        for led in active:
            upto = d - led.first_day + 1
            itm_fracs.append(sum(1 for r in led.rows[:upto] if r.itm) / upto)
        widths = [float(led.width_bps) for led in active]
        window_vol = volumes[-window_days:]
        window_closes = closes[-window_days:]
        realized = (
            realized_volatility(window_closes) if len(window_closes) >= 2 else 0.0
        )
        rows.append(
            {
                "day": d,
                "unix_time": day_row.unix_time,
                "active_positions": len(active),
                "mean_size": statistics.fmean(sizes) if sizes else 0.0,
                "median_size": statistics.median(sizes) if sizes else 0.0,
                "mean_lifetime_days": statistics.fmean(lifetimes) if lifetimes else 0.0,
                "mean_itm_fraction": statistics.fmean(itm_fracs) if itm_fracs else 0.0,
                "median_width_bps": statistics.median(widths) if widths else 0.0,
                "window_mean_daily_volume": statistics.fmean(window_vol),
                "window_realized_vol": realized,
            }
        )
    return rows


def position_risk_rows(
    ledgers: dict[str, PositionLedger] | list[PositionLedger],
    min_lifetime_days: int = 30,
    min_value: float = 1e-4,
    level: float = 0.05,
) -> list[dict]:
    """One risk row per position clearing the lifetime and value floors.

    Returns (position_id, mean_daily, vol_daily, cvar, lifetime_days,
    time_itm_fraction, width_bps) dicts, in ledger order.
    """
    if isinstance(ledgers, dict):
        ledgers = list(ledgers.values())
    rows = []
    for led in ledgers:
        if led.lifetime_days < min_lifetime_days or led.deposit_value < min_value:
            continue
        returns = led.daily_returns
        stats = return_stats(returns)
        rows.append(
            {
                "position_id": led.position_id,
                "mean_daily": stats.mean_daily,
                "vol_daily": stats.vol_daily,
                "cvar": _cvar(returns, level),
                "lifetime_days": led.lifetime_days,
                "time_itm_fraction": led.itm_fraction,
                "width_bps": led.width_bps,
            }
        )
    return rows


_POSITIONS_HEADER = [
    "position_id",
    "tick_lower",
    "tick_upper",
    "width_bps",
    "liquidity",
    "entry_time",
    "entry_price",
    "deposit_x",
    "deposit_y",
    "deposit_value",
    "lifetime_days",
    "itm_days",
    "itm_seconds",
    "live_seconds",
    "closed",
    "close_time",
    "close_price",
    "returned_x",
    "returned_y",
    "fees_x_total",
    "fees_y_total",
]
_LEDGER_HEADER = [
    "day",
    "unix_time",
    "price",
    "value",
    "hold_value",
    "fees_x",
    "fees_y",
    "itm",
    "daily_return",
]
_DAILY_HEADER = ["day", "unix_time", "price", "volume_y", "swap_count"]
_DRIFT_HEADER = [
    "seq",
    "unix_time",
    "token_in",
    "amount_in",
    "logged_out",
    "simulated_out",
    "rel_drift",
]


def write_replay_outputs(result: ReplayResult, out_dir: str, meta: str = "") -> dict[str, str]:
    """Write per-position ledgers and aggregate series as CSV files.

    Creates positions.csv, ledger_<id>.csv per position, pool_daily.csv and
    swap_drift.csv under ``out_dir``. Output is byte-stable for identical
    replays. Returns the written paths keyed by logical name.
    """
    comment = f"{LEDGER_SCHEMA} | {meta}" if meta else LEDGER_SCHEMA
    paths: dict[str, str] = {}
    pos_rows = []
    for led in result.ledgers.values():
        pos_rows.append(
            [
                led.position_id,
                led.tick_lower,
                led.tick_upper,
                led.width_bps,
                led.liquidity,
                led.entry_time,
                led.entry_price,
                led.deposit_x,
                led.deposit_y,
                led.deposit_value,
                led.lifetime_days,
                led.itm_days,
                led.itm_seconds,
                led.live_seconds,
                led.closed,
                led.close_time,
                led.close_price,
                led.returned_x,
                led.returned_y,
                led.fees_x_total,
                led.fees_y_total,
            ]
        )
    paths["positions"] = write_csv(
        os.path.join(out_dir, "positions.csv"), comment, _POSITIONS_HEADER, pos_rows
    )
    for led in result.ledgers.values():
        rows = [
            [r.day, r.unix_time, r.price, r.value, r.hold_value, r.fees_x, r.fees_y, r.itm, r.daily_return]
            for r in led.rows
        ]
        paths[f"ledger_{led.position_id}"] = write_csv(
            os.path.join(out_dir, f"ledger_{led.position_id}.csv"),
            f"{comment} | position={led.position_id}",
            _LEDGER_HEADER,
            rows,
        )
    paths["pool_daily"] = write_csv(
        os.path.join(out_dir, "pool_daily.csv"),
        comment,
        _DAILY_HEADER,
        [[d.day, d.unix_time, d.price, d.volume_y, d.swap_count] for d in result.daily],
    )
    paths["swap_drift"] = write_csv(
        os.path.join(out_dir, "swap_drift.csv"),
        comment,
        _DRIFT_HEADER,
        [
            [s.seq, s.unix_time, s.token_in, s.amount_in, s.logged_out, s.simulated_out, s.rel_drift]
            for s in result.swap_drifts
        ],
    )
    return paths


def load_ledgers(out_dir: str) -> list[PositionLedger]:
    """Reload ledgers previously written by write_replay_outputs."""
    _, _, pos_rows = read_csv(os.path.join(out_dir, "positions.csv"))
    ledgers = []
    for row in pos_rows:
        led = PositionLedger(
            position_id=row["position_id"],
            tick_lower=int(row["tick_lower"]),
            tick_upper=int(row["tick_upper"]),
            liquidity=float(row["liquidity"]),
            entry_time=int(row["entry_time"]),
            entry_price=float(row["entry_price"]),
            deposit_x=float(row["deposit_x"]),
            deposit_y=float(row["deposit_y"]),
            itm_days=int(row["itm_days"]),
            lifetime_days=int(row["lifetime_days"]),
            itm_seconds=float(row["itm_seconds"]),
            live_seconds=float(row["live_seconds"]),
            closed=row["closed"] == "1",
            close_time=int(row["close_time"]) if row["close_time"] else None,
            close_price=float(row["close_price"]) if row["close_price"] else None,
            returned_x=float(row["returned_x"]) if row["returned_x"] else None,
            returned_y=float(row["returned_y"]) if row["returned_y"] else None,
            fees_x_total=float(row["fees_x_total"]),
            fees_y_total=float(row["fees_y_total"]),
        )
        _, _, led_rows = read_csv(os.path.join(out_dir, f"ledger_{led.position_id}.csv"))
        for r in led_rows:
            led.rows.append(
                LedgerRow(
                    day=int(r["day"]),
                    unix_time=int(r["unix_time"]),
                    price=float(r["price"]),
                    value=float(r["value"]),
                    hold_value=float(r["hold_value"]),
                    fees_x=float(r["fees_x"]),
                    fees_y=float(r["fees_y"]),
                    itm=r["itm"] == "1",
                    daily_return=float(r["daily_return"]),
                )
            )
        ledgers.append(led)
    return ledgers
