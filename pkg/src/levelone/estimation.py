"""Calibration of the book model from order-flow and price logs.

Event logs give the four order streams (limit orders and market orders plus
cancellations, on each side); sizes are converted to a number of unit
orders by dividing by a base lot.  With the clock normalized to ``v = 1``
the pooled daily totals divided by the observed time estimate the base
rates.  Price logs give the price-change signs, the rate of price changes,
high-frequency volatility and the spread occupancy.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .birth_death import RateSchedule
from .lob import DAY_SECONDS, SimRecord

__all__ = [
    "SchemaError",
    "EstimationError",
    "EventLog",
    "PriceLog",
    "EstimatedParams",
    "SpreadTable",
    "HFVolatility",
    "ingest_events",
    "ingest_prices",
    "estimate_rates",
    "estimate_alpha_profile",
    "price_changes",
    "estimate_sign_chain",
    "estimate_c1_inv",
    "hf_sigma_tilde",
    "spread_table",
    "estimate_all",
    "event_log_from_record",
    "price_log_from_record",
    "write_events_log",
    "write_prices_log",
]

# stream order used everywhere: limit bid, limit ask, market+cancel bid, market+cancel ask
STREAMS = ("lambda_b", "lambda_a", "mu_b", "mu_a")
_EVENT_HEADER = ["day", "t", "side", "kind", "size"]
_PRICE_HEADER = ["day", "t", "mid", "spread"]


class SchemaError(ValueError):
    """Input file does not follow the documented layout."""


class EstimationError(ValueError):
    """Data are insufficient for the requested estimate."""


def _stream_index(side: str, kind: str) -> int:
    return (0 if kind == "L" else 2) + (0 if side == "B" else 1)


@dataclass
class EventLog:
    """Order-flow events in lot units.

    ``day`` (>= 1), ``t`` (seconds since the open) and ``stream`` (index into
    ``STREAMS``) are parallel arrays; ``weight`` is size divided by the base lot.
    """

    day: np.ndarray
    t: np.ndarray
    stream: np.ndarray
    weight: np.ndarray
    t_d: float = DAY_SECONDS
    base_lot: float = 100.0

    @property
    def days(self) -> np.ndarray:
        return np.unique(self.day)

    @property
    def n_days(self) -> int:
        return int(self.days.size)

    def is_empty(self) -> bool:
        return self.day.size == 0

    def daily_totals(self) -> np.ndarray:
        """Array ``(n_days, 4)`` of ``Lambda_{i t_d}`` / ``M_{i t_d}`` per stream."""
        days = self.days
        out = np.zeros((days.size, 4))
        row = np.searchsorted(days, self.day)
        np.add.at(out, (row, self.stream), self.weight)
        return out

    def cumulative(self, day: int, stream: int, t):
        """Counts up to time ``t`` on one day for one stream (nondecreasing in ``t``)."""
        m = (self.day == day) & (self.stream == stream)
        tt, ww = self.t[m], np.cumsum(self.weight[m])
        k = np.searchsorted(tt, np.asarray(t, dtype=float), side="right")
        return np.where(k > 0, ww[np.maximum(k - 1, 0)] if ww.size else 0.0, 0.0)


def _open_lines(path):
    text = Path(path).read_text(encoding="utf-8")
    return text.splitlines()


def ingest_events(path, *, base_lot: float = 100.0, t_d: float = DAY_SECONDS) -> EventLog:
    """Read an events CSV (``day,t,side,kind,size``).

    Kinds ``M`` (market) and ``C`` (cancel) both feed the departure stream.
    Timestamps must be nondecreasing within a day and lie in ``[0, t_d)``.
    Errors name the offending line.
    """
    if not base_lot > 0:
        raise ValueError("base_lot must be positive")
    lines = _open_lines(path)
    days, ts, streams, weights = [], [], [], []
    if not lines or not lines[0].strip():
        return EventLog(np.zeros(0, int), np.zeros(0), np.zeros(0, int), np.zeros(0), t_d, base_lot)
    header = [h.strip() for h in lines[0].split(",")]
    if header != _EVENT_HEADER:
        raise SchemaError(f"line 1: expected header {','.join(_EVENT_HEADER)}, got {lines[0]!r}")
    last_t: dict[int, float] = {}
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 5:
            raise SchemaError(f"line {lineno}: expected 5 fields, got {len(row)}")
        d_s, t_s, side, kind, size_s = (c.strip() for c in row)
        try:
            d = int(d_s)
            t = float(t_s)
            size = float(size_s)
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
        if d < 1:
            raise SchemaError(f"line {lineno}: day must be a positive integer")
        if not (0.0 <= t < t_d):
            raise SchemaError(f"line {lineno}: t={t} outside [0, {t_d})")
        if side not in ("B", "A"):
            raise SchemaError(f"line {lineno}: side must be B or A, got {side!r}")
        if kind not in ("L", "M", "C"):
            raise SchemaError(f"line {lineno}: kind must be L, M or C, got {kind!r}")
        if not (size > 0 and math.isfinite(size)):
            raise SchemaError(f"line {lineno}: size must be positive")
        if t < last_t.get(d, -math.inf):
            raise SchemaError(f"line {lineno}: timestamp decreases within day {d}")
        last_t[d] = t
        days.append(d)
        ts.append(t)
        streams.append(_stream_index(side, kind))
        weights.append(size / base_lot)
    return EventLog(np.asarray(days, dtype=np.int64), np.asarray(ts, dtype=float),
                    np.asarray(streams, dtype=np.int64), np.asarray(weights, dtype=float),
                    t_d, base_lot)


@dataclass
class PriceLog:
    """Mid-price observations; ``spread`` is in ticks (NaN when absent)."""

    day: np.ndarray
    t: np.ndarray
    mid: np.ndarray
    spread: np.ndarray
    t_d: float = DAY_SECONDS

    @property
    def days(self) -> np.ndarray:
        return np.unique(self.day)

    def for_day(self, d: int):
        m = self.day == d
        return self.t[m], self.mid[m], self.spread[m]


def ingest_prices(path, *, t_d: float = DAY_SECONDS) -> PriceLog:
    """Read a prices CSV (``day,t,mid[,spread]``)."""
    lines = _open_lines(path)
    if not lines or not lines[0].strip():
        raise SchemaError("prices file is empty")
    header = [h.strip() for h in lines[0].split(",")]
    if header not in (_PRICE_HEADER, _PRICE_HEADER[:3]):
        raise SchemaError(f"line 1: expected header day,t,mid[,spread], got {lines[0]!r}")
    ncol = len(header)
    days, ts, mids, spreads = [], [], [], []
    last_t: dict[int, float] = {}
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != ncol:
            raise SchemaError(f"line {lineno}: expected {ncol} fields, got {len(row)}")
        try:
            d = int(row[0])
            t = float(row[1])
            mid = float(row[2])
            spr = float(row[3]) if ncol == 4 and row[3].strip() else math.nan
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
        if d < 1:
            raise SchemaError(f"line {lineno}: day must be a positive integer")
        if not (0.0 <= t <= t_d):
            raise SchemaError(f"line {lineno}: t={t} outside [0, {t_d}]")
        if t < last_t.get(d, -math.inf):
            raise SchemaError(f"line {lineno}: timestamp decreases within day {d}")
        last_t[d] = t
        days.append(d)
        ts.append(t)
        mids.append(mid)
        spreads.append(spr)
    return PriceLog(np.asarray(days, dtype=np.int64), np.asarray(ts, dtype=float),
                    np.asarray(mids, dtype=float), np.asarray(spreads, dtype=float), t_d)


# --------------------------------------------------------------------------
# estimators

@dataclass
class SpreadTable:
    """Time-weighted share of each spread category (rows ``1``, ``2``, ``>2`` ticks)."""

    days: np.ndarray
    fractions: np.ndarray  # (3, n_days)

    @property
    def average(self) -> np.ndarray:
        return self.fractions.mean(axis=1)

    def format(self) -> str:
        labels = ["1", "2", "> 2"]
        head = "Spread  " + "".join(f"{int(d):>8d}" for d in self.days) + f"{'Ave.':>8s}"
        rows = [head]
        for k, lab in enumerate(labels):
            vals = list(self.fractions[k]) + [self.average[k]]
            rows.append(f"{lab:<8s}" + "".join(f"{100 * v:>7.1f}%" for v in vals))
        return "\n".join(rows)

    def to_dict(self) -> dict:
        return {"days": [int(d) for d in self.days], "categories": ["1", "2", ">2"],
                "fractions": self.fractions.tolist(), "average": self.average.tolist()}


@dataclass
class HFVolatility:
    """``s_Delta / sqrt(Delta)`` per day and pooled over days."""

    window: float
    per_day: dict
    pooled: float
    n_windows: int


@dataclass
class EstimatedParams:
    """Pooled estimates; rates are per second with the clock normalized to ``v = 1``."""

    lambda_a: float
    lambda_b: float
    mu_a: float
    mu_b: float
    n_days: int
    t_d: float
    v_hat: float = 1.0
    v_days: list = field(default_factory=list)
    Pi_hat: np.ndarray | None = None
    nu_hat: float | None = None
    c1_inv_hat: float | None = None
    sigma_tilde_hf: dict = field(default_factory=dict)
    spread_table: SpreadTable | None = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "lambda_a": self.lambda_a, "lambda_b": self.lambda_b,
            "mu_a": self.mu_a, "mu_b": self.mu_b,
            "v_hat": self.v_hat, "v_days": list(self.v_days),
            "n_days": self.n_days, "t_d": self.t_d,
            "Pi_hat": None if self.Pi_hat is None else np.asarray(self.Pi_hat).tolist(),
            "nu_hat": self.nu_hat, "c1_inv_hat": self.c1_inv_hat,
            "sigma_tilde_hf": {str(k): v for k, v in self.sigma_tilde_hf.items()},
            "spread_table": None if self.spread_table is None else self.spread_table.to_dict(),
            "flags": list(self.flags),
        }
        return out


def estimate_rates(log: EventLog) -> EstimatedParams:
    """Pooled rates ``sum_i total_i / (n t_d)`` for the four streams.

    Per-day ``v_i`` diagnostics are the day's total flow over the pooled
    mean daily flow (the clock itself is not observed).  Days with a stream
    that never fires are listed in ``flags``.
    """
    if log.is_empty():
        raise EstimationError("event log is empty; nothing to estimate")
    totals = log.daily_totals()
    n = totals.shape[0]
    pooled = totals.sum(axis=0) / (n * log.t_d)
    flags = []
    for i, d in enumerate(log.days):
        zero = [STREAMS[k] for k in range(4) if totals[i, k] == 0]
        if zero:
            flags.append(f"day {int(d)}: zero count in {', '.join(zero)}")
    day_flow = totals.sum(axis=1)
    v_days = (day_flow / day_flow.mean()).tolist()
    return EstimatedParams(lambda_a=float(pooled[1]), lambda_b=float(pooled[0]),
                           mu_a=float(pooled[3]), mu_b=float(pooled[2]),
                           n_days=n, t_d=log.t_d, v_days=v_days, flags=flags)


def estimate_alpha_profile(log: EventLog, bins: int) -> RateSchedule:
    """Daily intensity profile: pooled event mass per bin, normalized to mean 1."""
    bins = int(bins)
    if bins < 1:
        raise ValueError("bins must be positive")
    if float(log.t_d).is_integer() and int(log.t_d) % bins != 0:
        raise ValueError(f"bins={bins} does not divide t_d={log.t_d}")
    width = log.t_d / bins
    if log.is_empty():
        raise EstimationError("event log is empty; nothing to estimate")
    k = np.minimum((log.t / width).astype(np.int64), bins - 1)
    mass = np.bincount(k, weights=log.weight, minlength=bins)
    if np.any(mass == 0):
        warnings.warn(f"{int(np.sum(mass == 0))} empty bin(s) get profile value 0", stacklevel=2)
    values = mass / mass.mean()
    return RateSchedule.steps(values, log.t_d)


def price_changes(prices: PriceLog, delta: float):
    """Price-change events ``{day: (times, signs)}`` from mid quotes.

    Rows sharing a timestamp are merged (the last mid counts).  A change is
    recorded whenever the mid has moved by at least ``delta/2`` from the
    level of the previous change (or the day's first quote).
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    out = {}
    for d in prices.days:
        t, mid, _ = prices.for_day(d)
        if t.size == 0:
            continue
        last = np.r_[t[1:] != t[:-1], True]
        t, mid = t[last], mid[last]
        times, signs = [], []
        ref = mid[0]
        for ti, m in zip(t[1:], mid[1:]):
            move = m - ref
            if abs(move) >= 0.5 * delta - 1e-12 * max(1.0, abs(ref)):
                times.append(ti)
                signs.append(1 if move > 0 else -1)
                ref = m
        out[int(d)] = (np.asarray(times, dtype=float), np.asarray(signs, dtype=np.int64))
    return out


def estimate_sign_chain(prices: PriceLog, delta: float):
    """``(Pi_hat, nu_hat)`` from transitions of consecutive signs within each day.

    States are ordered ``(-delta, +delta)``.  A state that is never left
    leaves its row undefined and raises ``EstimationError``.
    """
    counts = np.zeros((2, 2))
    n_changes = 0
    for _, signs in price_changes(prices, delta).values():
        n_changes += signs.size
        if signs.size < 2:
            continue
        a = (signs[:-1] > 0).astype(int)
        b = (signs[1:] > 0).astype(int)
        np.add.at(counts, (a, b), 1.0)
    if n_changes < 2:
        raise EstimationError("need at least 2 price changes")
    rows = counts.sum(axis=1)
    if np.any(rows == 0):
        missing = ["-delta" if i == 0 else "+delta" for i in np.flatnonzero(rows == 0)]
        raise EstimationError(f"sign state {', '.join(missing)} never left: row undefined")
    Pi = counts / rows[:, None]
    nu = Pi[1, 0] / (Pi[0, 1] + Pi[1, 0]) if Pi[0, 1] + Pi[1, 0] > 0 else math.nan
    return Pi, float(nu)


def estimate_c1_inv(prices: PriceLog, delta: float) -> float:
    """Number of price changes per second of observed trading time."""
    n_days = prices.days.size
    total = n_days * prices.t_d
    if not total > 0:
        raise EstimationError("no observation time")
    n = sum(s.size for _, s in price_changes(prices, delta).values())
    return n / total


def _step_values(t, mid, grid):
    k = np.searchsorted(t, grid, side="right") - 1
    if np.any(k < 0):
        raise EstimationError("no quote at or before a window boundary")
    return mid[k]


def hf_sigma_tilde(prices: PriceLog, delta_seconds: float) -> HFVolatility:
    """``s_Delta / sqrt(Delta)`` over non-overlapping windows inside each day."""
    if not delta_seconds > 0:
        raise ValueError("window must be positive")
    m = int(math.floor(prices.t_d / delta_seconds + 1e-9))
    per_day, pooled = {}, []
    for d in prices.days:
        t, mid, _ = prices.for_day(d)
        grid = np.arange(m + 1) * delta_seconds
        inc = np.diff(_step_values(t, mid, grid))
        pooled.append(inc)
        per_day[int(d)] = float(np.std(inc, ddof=1) / math.sqrt(delta_seconds)) if inc.size >= 2 else math.nan
    allinc = np.concatenate(pooled) if pooled else np.zeros(0)
    if allinc.size < 2:
        raise EstimationError("need at least 2 complete windows")
    return HFVolatility(float(delta_seconds), per_day,
                        float(np.std(allinc, ddof=1) / math.sqrt(delta_seconds)), int(allinc.size))


def spread_table(prices: PriceLog) -> SpreadTable:
    """Time-weighted occupancy of spreads of 1, 2 and more than 2 ticks."""
    days = prices.days
    if days.size == 0 or np.all(np.isnan(prices.spread)):
        raise EstimationError("no spread samples")
    fr = np.zeros((3, days.size))
    for j, d in enumerate(days):
        t, _, spr = prices.for_day(d)
        ok = ~np.isnan(spr)
        t, spr = t[ok], spr[ok]
        if t.size == 0:
            fr[:, j] = np.nan
            continue
        dur = np.diff(np.r_[t, prices.t_d])
        cat = np.where(spr < 1.5, 0, np.where(spr < 2.5, 1, 2))
        fr[:, j] = np.bincount(cat, weights=dur, minlength=3) / dur.sum()
    return SpreadTable(days, fr)


def estimate_all(log: EventLog, prices: PriceLog | None = None, *, delta: float = 1.0,
                 windows=(600.0,)) -> EstimatedParams:
    """Rates from the events; sign chain, ``1/c1``, volatility and spreads from prices."""
    est = estimate_rates(log)
    if prices is None:
        return est
    try:
        est.Pi_hat, est.nu_hat = estimate_sign_chain(prices, delta)
    except EstimationError as exc:
        est.flags.append(str(exc))
    est.c1_inv_hat = estimate_c1_inv(prices, delta)
    for w in windows:
        try:
            est.sigma_tilde_hf[float(w)] = hf_sigma_tilde(prices, w).pooled
        except EstimationError as exc:
            est.flags.append(f"window {w}: {exc}")
    if not np.all(np.isnan(prices.spread)):
        est.spread_table = spread_table(prices)
    return est


# --------------------------------------------------------------------------
# synthetic logs from simulations

def event_log_from_record(record: SimRecord, t_d: float = DAY_SECONDS,
                          base_lot: float = 100.0) -> EventLog:
    """Unit-size order stream of a simulated record, split into days of ``t_d`` seconds."""
    if record.events is None:
        raise ValueError("record has no event stream")
    ev = record.events
    day = np.floor(ev["t"] / t_d).astype(np.int64)
    t = ev["t"] - day * t_d
    stream = np.where(ev["kind"] == "L", 0, 2) + np.where(ev["side"] == "B", 0, 1)
    keep = t < t_d
    return EventLog(day[keep] + 1, t[keep], stream[keep].astype(np.int64),
                    np.ones(int(keep.sum())), t_d, base_lot)


def price_log_from_record(record: SimRecord, t_d: float = DAY_SECONDS,
                          spread_ticks: float = 1.0) -> PriceLog:
    """Mid quotes of a simulated record: one row per day open and per jump."""
    n_days = int(math.ceil(record.horizon / t_d - 1e-12))
    jt = record.jump_times
    path_mid = record.s0 + np.cumsum(record.directions)
    opens = np.arange(n_days) * t_d
    k = np.searchsorted(jt, opens, side="right")
    open_mid = np.where(k > 0, path_mid[np.maximum(k - 1, 0)] if jt.size else record.s0, record.s0)
    t_all = np.r_[opens, jt]
    mid_all = np.r_[open_mid, path_mid]
    order = np.argsort(t_all, kind="stable")
    t_all, mid_all = t_all[order], mid_all[order]
    day = np.floor(t_all / t_d).astype(np.int64)
    keep = day < n_days
    t_in = t_all[keep] - day[keep] * t_d
    return PriceLog(day[keep] + 1, t_in, mid_all[keep],
                    np.full(int(keep.sum()), float(spread_ticks)), t_d)


def write_events_log(log: EventLog, path) -> None:
    """Write an events CSV in the ingestion layout (sizes in shares)."""
    side = np.where(log.stream % 2 == 0, "B", "A")
    kind = np.where(log.stream < 2, "L", "M")
    buf = io.StringIO()
    buf.write(",".join(_EVENT_HEADER) + "\n")
    for d, t, s, k, w in zip(log.day, log.t, side, kind, log.weight):
        buf.write(f"{d},{t:.9f},{s},{k},{w * log.base_lot:.6f}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_prices_log(prices: PriceLog, path) -> None:
    buf = io.StringIO()
    buf.write(",".join(_PRICE_HEADER) + "\n")
    for d, t, m, s in zip(prices.day, prices.t, prices.mid, prices.spread):
        sp = "" if np.isnan(s) else f"{s:g}"
        buf.write(f"{d},{t:.9f},{m:.9f},{sp}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
