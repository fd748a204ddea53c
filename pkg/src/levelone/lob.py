"""Level-1 order book: configuration, exact simulation and price paths.

The book holds one bid and one ask queue.  Limit orders (rate
``alpha_t * lam``) add one unit to a queue, market orders and cancellations
(rate ``alpha_t * mu``) remove one.  When the ask queue empties the price
moves up one tick and both sizes are redrawn from ``f``; when the bid queue
empties the price moves down and the sizes are redrawn from ``f_tilde``.

Simulation runs in operational time, where all rates are constant, and maps
jump instants back to calendar time with ``A^{-1}``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _walks
from .birth_death import QueueRates, RateSchedule

__all__ = [
    "ConfigError",
    "RedrawDistribution",
    "ModelConfig",
    "SimRecord",
    "PricePath",
    "validate_config",
    "simulate",
    "simulate_batch",
    "price_path",
    "count_at",
    "sample_tau1",
    "write_record_csv",
    "read_record_csv",
    "write_events_csv",
    "DAY_SECONDS",
]

DAY_SECONDS = 23400.0


class ConfigError(ValueError):
    """Model configuration violates an invariant."""


class RedrawDistribution:
    """Law of the (bid size, ask size) pair drawn after a price change.

    Parameters
    ----------
    xs, ys : array_like of int
        Bid and ask sizes of each support point (all >= 1).
    probs : array_like
        Probability of each support point; must sum to 1 within 1e-12.
    """

    def __init__(self, xs, ys, probs, *, marginals=None):
        xs = np.asarray(xs, dtype=np.int64).ravel()
        ys = np.asarray(ys, dtype=np.int64).ravel()
        probs = np.asarray(probs, dtype=float).ravel()
        if not (xs.size == ys.size == probs.size) or xs.size == 0:
            raise ConfigError("support arrays must be nonempty and of equal length")
        if np.any(xs < 1) or np.any(ys < 1):
            raise ConfigError("redraw sizes must be at least 1")
        if np.any(probs < 0):
            raise ConfigError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ConfigError(f"probabilities sum to {probs.sum()!r}, not 1")
        self.xs, self.ys, self.probs = xs, ys, probs
        # (values_x, p_x, values_y, p_y) when the two sizes are independent
        self._marginals = marginals
        self._cdf = np.cumsum(probs)
        self._cdf[-1] = 1.0

    @classmethod
    def degenerate(cls, x: int, y: int) -> "RedrawDistribution":
        return cls([x], [y], [1.0])

    @classmethod
    def independent(cls, values_x, p_x, values_y, p_y) -> "RedrawDistribution":
        vx, px = np.asarray(values_x, dtype=np.int64), np.asarray(p_x, dtype=float)
        vy, py = np.asarray(values_y, dtype=np.int64), np.asarray(p_y, dtype=float)
        px, py = px / px.sum(), py / py.sum()
        X, Y = np.meshgrid(vx, vy, indexing="ij")
        P = np.outer(px, py)
        P = P / P.sum()
        return cls(X.ravel(), Y.ravel(), P.ravel(), marginals=(vx, px, vy, py))

    @classmethod
    def geometric(cls, mean_bid: float = 5.0, mean_ask: float = 5.0,
                  truncate: int = 200) -> "RedrawDistribution":
        """Independent geometric sizes on ``{1, ..., truncate}`` (renormalized)."""
        def marg(mean):
            if mean < 1:
                raise ConfigError("geometric mean must be at least 1")
            k = np.arange(1, truncate + 1)
            p = 1.0 / mean
            w = p * (1.0 - p) ** (k - 1)
            return k, w / w.sum()
        kx, px = marg(mean_bid)
        ky, py = marg(mean_ask)
        return cls.independent(kx, px, ky, py)

    @property
    def is_independent(self) -> bool:
        return self._marginals is not None

    @property
    def marginals(self):
        return self._marginals

    def swapped(self) -> "RedrawDistribution":
        """``(x, y) -> (y, x)``: the mirror image used for down-moves."""
        m = None
        if self._marginals is not None:
            vx, px, vy, py = self._marginals
            m = (vy, py, vx, px)
        return RedrawDistribution(self.ys, self.xs, self.probs, marginals=m)

    @property
    def gamma0(self) -> float:
        """``sum x y f(x, y)``."""
        return float(np.sum(self.xs * self.ys * self.probs))

    def gamma1(self, rates_ask: QueueRates, rates_bid: QueueRates) -> float:
        """``sum x y (mu_b/lam_b)^(x/2) (mu_a/lam_a)^(y/2) f(x, y)``."""
        lx = 0.5 * self.xs * math.log(rates_bid.mu / rates_bid.lam)
        ly = 0.5 * self.ys * math.log(rates_ask.mu / rates_ask.lam)
        with np.errstate(over="ignore"):
            return float(np.sum(self.xs * self.ys * self.probs * np.exp(lx + ly)))

    def sample(self, size: int, rng):
        """Draw ``size`` pairs; returns ``(bid_sizes, ask_sizes)``."""
        if self._marginals is not None:
            vx, px, vy, py = self._marginals
            return rng.choice(vx, size=size, p=px), rng.choice(vy, size=size, p=py)
        j = np.searchsorted(self._cdf, rng.random(size), side="right")
        j = np.minimum(j, self.probs.size - 1)
        return self.xs[j], self.ys[j]

    def __repr__(self):
        return f"RedrawDistribution(support={self.probs.size}, gamma0={self.gamma0:.6g})"


@dataclass
class ModelConfig:
    """Full model: tick, base rates on both sides, clock and redraw laws."""

    delta: float
    rates_ask: QueueRates
    rates_bid: QueueRates
    schedule: RateSchedule = field(default_factory=RateSchedule.identity)
    f: RedrawDistribution = field(default_factory=RedrawDistribution.geometric)
    f_tilde: RedrawDistribution | None = None
    f0: RedrawDistribution | None = None
    s0: float = 0.0

    def __post_init__(self):
        if self.f_tilde is None:
            self.f_tilde = self.f
        if self.f0 is None:
            self.f0 = self.f

    @property
    def C_a(self) -> float:
        return self.rates_ask.C

    @property
    def C_b(self) -> float:
        return self.rates_bid.C

    @property
    def is_critical(self) -> bool:
        return self.C_a + self.C_b == 0.0

    @property
    def gamma0(self) -> float:
        return self.f.gamma0

    @property
    def gamma1(self) -> float:
        return self.f.gamma1(self.rates_ask, self.rates_bid)

    @classmethod
    def symmetric(cls, lam: float, mu: float, *, delta: float = 1.0, **kw) -> "ModelConfig":
        r = QueueRates(lam, mu)
        return cls(delta=delta, rates_ask=r, rates_bid=r, **kw)


def validate_config(config: ModelConfig) -> ModelConfig:
    """Check the model invariants; returns the same config on success.

    Rejects a nonpositive tick, both queues supercritical (the book could
    then freeze forever) and unnormalized redraw laws.
    """
    if not (config.delta > 0 and np.isfinite(config.delta)):
        raise ConfigError("tick size delta must be positive")
    if config.rates_ask.supercritical and config.rates_bid.supercritical:
        raise ConfigError("lam > mu on both sides: the queues may never deplete")
    for name in ("f", "f_tilde", "f0"):
        dist = getattr(config, name)
        if not isinstance(dist, RedrawDistribution):
            raise ConfigError(f"{name} must be a RedrawDistribution")
        if abs(dist.probs.sum() - 1.0) > 1e-12:
            raise ConfigError(f"{name} is not normalized")
    if not np.isfinite(config.gamma0):
        raise ConfigError("gamma0 is infinite")
    if config.schedule.v <= 0:
        raise ConfigError("schedule has zero mean")
    return config


@dataclass
class SimRecord:
    """One simulated realization.

    ``redraws[n]`` holds the sizes in force after the ``n``-th jump
    (``redraws[0]`` is the initial state), so ``len(redraws) == len(jump_times) + 1``.
    ``events``, when recorded, is a structured array with fields
    ``t, side ('B'/'A'), kind ('L'/'M'), qb, qa`` (sizes after the event).
    """

    jump_times: np.ndarray
    directions: np.ndarray
    redraws: np.ndarray
    s0: float
    delta: float
    horizon: float
    events: np.ndarray | None = None

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)


@dataclass
class PricePath:
    """Step-function view of a record: ``S_t`` and the jump count ``N_t``."""

    jump_times: np.ndarray
    cum_moves: np.ndarray
    s0: float
    horizon: float

    def count(self, t):
        t = np.asarray(t, dtype=float)
        out = np.searchsorted(self.jump_times, t, side="right")
        return out[()] if out.ndim == 0 else out

    def price(self, t):
        n = np.asarray(self.count(t))
        out = self.s0 + np.r_[0.0, self.cum_moves][n]
        return out[()] if out.ndim == 0 else out


def price_path(record: SimRecord) -> PricePath:
    return PricePath(record.jump_times, np.cumsum(record.directions), record.s0, record.horizon)


def count_at(path: PricePath, t):
    """``N_t = max{n : V_n <= t}``."""
    if np.any(np.asarray(t) > path.horizon):
        raise ValueError("t beyond the simulated horizon")
    return path.count(t)


def _resolve_signs(prev_up: bool, up_if_up, up_if_down):
    """Sign sequence of a two-candidate batch.

    Jump ``j`` uses the candidate drawn from ``f`` when jump ``j-1`` went up
    and the one drawn from ``f_tilde`` otherwise.  Returns the boolean
    "went up" array for the batch, computed without a Python loop: where
    both candidates agree the sign is forced, elsewhere it either copies or
    flips the previous sign.
    """
    a = np.asarray(up_if_up, dtype=bool)
    b = np.asarray(up_if_down, dtype=bool)
    n = a.size
    vals = np.concatenate([[prev_up], a])
    reset = np.concatenate([[True], a == b])
    flip = np.concatenate([[False], ~a & b])
    csum = np.cumsum(flip)
    last = np.maximum.accumulate(np.where(reset, np.arange(n + 1), 0))
    parity = (csum - csum[last]) % 2 == 1
    return (vals[last] ^ parity)[1:]


def _simulate_races(config: ModelConfig, op_horizon: float, rng):
    """Jump instants (operational time), signs and post-jump sizes."""
    bid = (config.rates_bid.lam, config.rates_bid.mu)
    ask = (config.rates_ask.lam, config.rates_ask.mu)
    x0, y0 = config.f0.sample(1, rng)
    sizes = [np.array([[x0[0], y0[0]]])]
    times = []
    ups = []
    clock = 0.0
    dur, af = _walks.race(x0, y0, bid, ask, op_horizon, rng)
    if not np.isfinite(dur[0]):
        return np.zeros(0), np.zeros(0, dtype=bool), sizes[0]
    clock = float(dur[0])
    times.append(dur[:1])
    ups.append(af[:1])
    prev_up = bool(af[0])
    same = config.f_tilde is config.f
    batch = 64
    while True:
        remaining = op_horizon - clock
        ux, uy = config.f.sample(batch, rng)
        u_dur, u_up = _walks.race(ux, uy, bid, ask, remaining, rng)
        if same:
            dx, dy, d_dur, d_up = ux, uy, u_dur, u_up
        else:
            dx, dy = config.f_tilde.sample(batch, rng)
            d_dur, d_up = _walks.race(dx, dy, bid, ask, remaining, rng)
        # the race at position j starts from the sizes drawn after jump j-1
        went_up = np.concatenate([[prev_up], _resolve_signs(prev_up, u_up, d_up)])
        use_up = went_up[:-1]
        dur_j = np.where(use_up, u_dur, d_dur)
        start_x = np.where(use_up, ux, dx)
        start_y = np.where(use_up, uy, dy)
        cum = clock + np.cumsum(dur_j)
        inside = np.flatnonzero(~(cum <= op_horizon))
        stop = int(inside[0]) if inside.size else batch
        times.append(cum[:stop])
        ups.append(went_up[1:stop + 1])
        sizes.append(np.column_stack([start_x[:stop + 1], start_y[:stop + 1]])
                     if stop < batch else np.column_stack([start_x, start_y]))
        if stop < batch:
            break
        clock = float(cum[-1])
        prev_up = bool(went_up[-1])
        batch = min(batch * 2, 1 << 16)
    op_times = np.concatenate(times)
    went = np.concatenate(ups)
    redraws = np.concatenate(sizes)[: op_times.size + 1]
    return op_times, went, redraws


def _simulate_stream(config: ModelConfig, op_horizon: float, rng):
    """Order-by-order simulation from the four exogenous Poisson streams."""
    la, ma = config.rates_ask.lam, config.rates_ask.mu
    lb, mb = config.rates_bid.lam, config.rates_bid.mu
    rate = la + ma + lb + mb
    n_events = rng.poisson(rate * op_horizon)
    t_op = np.sort(rng.random(n_events)) * op_horizon
    kind = rng.choice(4, size=n_events, p=np.array([la, ma, lb, mb]) / rate)
    da = np.select([kind == 0, kind == 1], [1, -1], 0).astype(np.int64)
    db = np.select([kind == 2, kind == 3], [1, -1], 0).astype(np.int64)

    x0, y0 = config.f0.sample(1, rng)
    qb, qa = int(x0[0]), int(y0[0])
    redraws = [(qb, qa)]
    jump_idx, ups = [], []
    qb_after = np.empty(n_events, dtype=np.int64)
    qa_after = np.empty(n_events, dtype=np.int64)
    p = 0
    window = 64
    while p < n_events:
        hi = min(n_events, p + window)
        pa = qa + np.cumsum(da[p:hi])
        pb = qb + np.cumsum(db[p:hi])
        hit = (pa == 0) | (pb == 0)
        if not hit.any():
            if hi == n_events:
                qa_after[p:hi], qb_after[p:hi] = pa, pb
                break
            window *= 2
            continue
        h = int(hit.argmax())
        qa_after[p:p + h + 1], qb_after[p:p + h + 1] = pa[: h + 1], pb[: h + 1]
        up = bool(pa[h] == 0)
        jump_idx.append(p + h)
        ups.append(up)
        dist = config.f if up else config.f_tilde
        nx, ny = dist.sample(1, rng)
        qb, qa = int(nx[0]), int(ny[0])
        redraws.append((qb, qa))
        p += h + 1
        window = max(64, min(window, 4 * (h + 1)))
    jump_idx = np.asarray(jump_idx, dtype=np.int64)
    events = np.empty(n_events, dtype=[("t", float), ("side", "U1"), ("kind", "U1"),
                                      ("qb", np.int64), ("qa", np.int64)])
    events["t"] = config.schedule.inverse(t_op) if n_events else t_op
    events["side"] = np.where(kind < 2, "A", "B")
    events["kind"] = np.where(kind % 2 == 0, "L", "M")
    events["qb"], events["qa"] = qb_after, qa_after
    op_times = t_op[jump_idx] if jump_idx.size else np.zeros(0)
    return op_times, np.asarray(ups, dtype=bool), np.asarray(redraws, dtype=np.int64), events


def simulate(config: ModelConfig, horizon: float, seed=None, *, record_events=False,
             rng=None) -> SimRecord:
    """Simulate the book on ``[0, horizon]`` seconds.

    With ``record_events`` every order is generated and kept (slower);
    otherwise only the depletion races are simulated.  Both routes are exact.
    """
    validate_config(config)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(seed) if rng is None else rng
    op_horizon = float(config.schedule.integral(horizon))
    events = None
    if record_events:
        op_times, ups, redraws, events = _simulate_stream(config, op_horizon, rng)
    else:
        op_times, ups, redraws = _simulate_races(config, op_horizon, rng)
    jump_times = np.asarray(config.schedule.inverse(op_times), dtype=float)
    directions = np.where(ups, config.delta, -config.delta).astype(float)
    return SimRecord(jump_times=jump_times, directions=directions, redraws=redraws,
                     s0=config.s0, delta=config.delta, horizon=float(horizon), events=events)


def simulate_batch(config: ModelConfig, horizon: float, seeds, **kw):
    """Independent records, one per seed, returned in sorted-seed order."""
    return [simulate(config, horizon, seed=s, **kw) for s in sorted(seeds)]


def sample_tau1(config: ModelConfig, x: int, y: int, seed=None, *, size=None,
                cap: float = np.inf, rng=None):
    """Time of the first price change from sizes ``(x, y)`` (bid, ask).

    Returns a float, or an array when ``size`` is given.  Draws beyond ``cap``
    seconds are ``inf``.
    """
    if x < 1 or y < 1:
        raise ValueError("queue sizes must be at least 1")
    rng = np.random.default_rng(seed) if rng is None else rng
    n = 1 if size is None else int(size)
    op_cap = float(config.schedule.integral(cap)) if np.isfinite(cap) else np.inf
    dur, _ = _walks.race(np.full(n, x), np.full(n, y),
                         (config.rates_bid.lam, config.rates_bid.mu),
                         (config.rates_ask.lam, config.rates_ask.mu), op_cap, rng)
    real = np.asarray(config.schedule.inverse(dur), dtype=float)
    return float(real[0]) if size is None else real


# --------------------------------------------------------------------------
# CSV interfaces

_FMT = "{:.9f}"


def write_record_csv(record: SimRecord, path) -> None:
    """Write ``n, V_n, xi_n, x_n, y_n``; row 0 carries the initial sizes."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "V_n", "xi_n", "x_n", "y_n"])
        x0, y0 = record.redraws[0]
        w.writerow([0, _FMT.format(0.0), _FMT.format(0.0), int(x0), int(y0)])
        for n in range(record.n_jumps):
            x, y = record.redraws[n + 1]
            w.writerow([n + 1, _FMT.format(record.jump_times[n]),
                        _FMT.format(record.directions[n]), int(x), int(y)])


def read_record_csv(path, *, s0: float = 0.0, horizon: float | None = None) -> SimRecord:
    rows = list(csv.DictReader(Path(path).read_text(encoding="utf-8").splitlines()))
    if not rows or list(rows[0].keys()) != ["n", "V_n", "xi_n", "x_n", "y_n"]:
        raise ValueError(f"{path}: not a SimRecord CSV")
    jt = np.array([float(r["V_n"]) for r in rows[1:]])
    xi = np.array([float(r["xi_n"]) for r in rows[1:]])
    rd = np.array([[int(r["x_n"]), int(r["y_n"])] for r in rows], dtype=np.int64)
    delta = float(np.abs(xi).max()) if xi.size else 1.0
    hz = horizon if horizon is not None else (float(jt[-1]) if jt.size else 0.0)
    return SimRecord(jt, xi, rd, s0, delta, hz)


def write_events_csv(record: SimRecord, path) -> None:
    """Write the order stream ``t, side, kind, qb, qa``."""
    if record.events is None:
        raise ValueError("record has no event stream; simulate with record_events=True")
    ev = record.events
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("t,side,kind,qb,qa\n")
        for t, side, kind, qb, qa in zip(ev["t"], ev["side"], ev["kind"], ev["qb"], ev["qa"]):
            fh.write(f"{t:.9f},{side},{kind},{qb},{qa}\n")
