"""Extinction times of one order-book queue.

A queue is a birth-death walk on the nonnegative integers with arrival
(birth) rate ``lam`` and departure rate ``mu``, absorbed at 0.  Under a
proportional time dependence the inhomogeneous queue is the homogeneous one
run on the clock ``A_t = int_0^t alpha_s ds``, so every survival probability
reduces to the homogeneous one evaluated at ``A_t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _walks
from .specfun import bessel_i_scaled, bessel_i_scaled_table, upper_gamma, upper_gamma_any

__all__ = [
    "QueueRates",
    "RateSchedule",
    "ExtinctionSample",
    "a_of_t",
    "a_inverse",
    "extinction_density",
    "extinction_density_table",
    "survival_homogeneous",
    "survival_grid",
    "extinction_probability",
    "survival_tail_asymptotic",
    "survival_inhomogeneous",
    "simulate_extinction",
    "sample_extinction_times",
]

CRITICAL_RTOL = 1e-12


class QuadratureError(RuntimeError):
    """A survival integral did not reach its tolerance."""


@dataclass(frozen=True)
class QueueRates:
    """Arrival (``lam``) and departure (``mu``) intensities of one queue."""

    lam: float
    mu: float

    def __post_init__(self):
        for name in ("lam", "mu"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @property
    def C(self) -> float:
        """Exponential decay rate ``(sqrt(mu) - sqrt(lam))**2`` of the tail."""
        if self.is_critical:
            return 0.0
        return (math.sqrt(self.mu) - math.sqrt(self.lam)) ** 2

    @property
    def is_critical(self) -> bool:
        return abs(self.lam - self.mu) / (self.lam + self.mu) <= CRITICAL_RTOL

    @property
    def supercritical(self) -> bool:
        return self.lam > self.mu and not self.is_critical

    def scaled(self, h: float) -> "QueueRates":
        return QueueRates(self.lam * h, self.mu * h)


class RateSchedule:
    """Periodic piecewise-constant intensity multiplier ``alpha_t``.

    Parameters
    ----------
    breakpoints : array_like
        Start of each constant piece within one period; must start at 0 and
        increase strictly.
    values : array_like
        Nonnegative multiplier on each piece.
    period : float
        Length of the period in seconds.
    """

    def __init__(self, breakpoints, values, period: float):
        bp = np.asarray(breakpoints, dtype=float).ravel()
        vals = np.asarray(values, dtype=float).ravel()
        if bp.size == 0 or bp.size != vals.size:
            raise ValueError("breakpoints and values must be nonempty and of equal length")
        if bp[0] != 0.0 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if not period > bp[-1]:
            raise ValueError("period must exceed the last breakpoint")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("alpha values must be finite and nonnegative")
        self.breakpoints = bp
        self.values = vals
        self.period = float(period)
        widths = np.diff(np.append(bp, self.period))
        self._cum = np.concatenate([[0.0], np.cumsum(widths * vals)])
        self.per_period = float(self._cum[-1])
        self.v = self.per_period / self.period

    @classmethod
    def identity(cls, period: float = 1.0) -> "RateSchedule":
        return cls([0.0], [1.0], period)

    @classmethod
    def steps(cls, values, period: float) -> "RateSchedule":
        """Equal-width pieces covering one period."""
        values = np.asarray(values, dtype=float)
        return cls(np.arange(values.size) * period / values.size, values, period)

    def __repr__(self):
        return (f"RateSchedule(breakpoints={self.breakpoints.tolist()}, "
                f"values={self.values.tolist()}, period={self.period})")

    def __eq__(self, other):
        return (isinstance(other, RateSchedule) and self.period == other.period
                and np.array_equal(self.breakpoints, other.breakpoints)
                and np.array_equal(self.values, other.values))

    @property
    def alpha_max(self) -> float:
        return float(self.values.max())

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.values == 1.0))

    def normalized(self) -> "RateSchedule":
        """Same shape, rescaled so that the long-run mean ``v`` equals 1."""
        if self.v <= 0:
            raise ValueError("cannot normalize an identically zero schedule")
        return RateSchedule(self.breakpoints, self.values / self.v, self.period)

    def scaled(self, h: float) -> "RateSchedule":
        return RateSchedule(self.breakpoints, self.values * h, self.period)

    def alpha(self, t):
        t = np.asarray(t, dtype=float)
        phase = np.mod(t, self.period)
        j = np.searchsorted(self.breakpoints, phase, side="right") - 1
        out = self.values[j]
        return out[()] if out.ndim == 0 else out

    def integral(self, t):
        """``A_t``: exact integral of the profile over ``[0, t]``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("t must be nonnegative")
        k = np.floor(t / self.period)
        phase = t - k * self.period
        j = np.searchsorted(self.breakpoints, phase, side="right") - 1
        out = k * self.per_period + self._cum[j] + (phase - self.breakpoints[j]) * self.values[j]
        return out[()] if out.ndim == 0 else out

    def inverse(self, s):
        """``inf{t : A_t >= s}``, vectorized."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("s must be nonnegative")
        if self.per_period <= 0:
            if np.any(s > 0):
                raise ValueError("alpha vanishes identically; positive clock values are unreachable")
            return np.zeros_like(s)[()] if s.ndim == 0 else np.zeros_like(s)
        inf_mask = np.isinf(s)
        s_fin = np.where(inf_mask, 0.0, s)
        k = np.floor(s_fin / self.per_period)
        rem = s_fin - k * self.per_period
        # land at the end of the previous period rather than after a flat stretch
        wrap = (rem == 0.0) & (k > 0)
        k = np.where(wrap, k - 1, k)
        rem = np.where(wrap, self.per_period, rem)
        ends = self._cum[1:]
        j = np.searchsorted(ends, rem, side="left")
        j = np.minimum(j, self.values.size - 1)
        val = self.values[j]
        frac = np.where(val > 0, (rem - self._cum[j]) / np.where(val > 0, val, 1.0), 0.0)
        out = k * self.period + self.breakpoints[j] + frac
        out = np.where(inf_mask, np.inf, out)
        return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class ExtinctionSample:
    """One simulated extinction time (``inf`` if not extinct by the cap)."""

    time: float
    path_peak: int


def a_of_t(schedule: RateSchedule, t):
    """Integrated intensity ``A_t``."""
    return schedule.integral(t)


def a_inverse(schedule: RateSchedule, s):
    """Generalized inverse of ``A``: the first time the clock reaches ``s``."""
    return schedule.inverse(s)


# --------------------------------------------------------------------------
# densities and survival functions

def extinction_density(rates: QueueRates, x, s):
    """Density of the extinction time at ``s`` (defective when ``lam > mu``).

    ``x (mu/lam)^(x/2) s^-1 I_x(2 s sqrt(lam mu)) exp(-s (lam + mu))``,
    evaluated as ``x/s * ive(x, z) * exp(x/2 log(mu/lam) - s C)`` so that
    nothing overflows.  Broadcasts over ``x`` and ``s``.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    root = math.sqrt(rates.lam * rates.mu)
    C = (math.sqrt(rates.mu) - math.sqrt(rates.lam)) ** 2
    ive = bessel_i_scaled(x.astype(np.int64), 2.0 * root * s)
    with np.errstate(divide="ignore", invalid="ignore"):
        logfac = 0.5 * x * math.log(rates.mu / rates.lam) - s * C
        out = np.where(s > 0, x / np.where(s > 0, s, 1.0) * ive * np.exp(logfac), 0.0)
    return out[()] if out.ndim == 0 else out


def extinction_density_table(rates: QueueRates, xs, s):
    """Extinction densities on an outer grid: shape ``(len(s), len(xs))``.

    Same values as :func:`extinction_density` but the Bessel work is shared
    by all start sizes at a given time.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
    s = np.atleast_1d(np.asarray(s, dtype=float)).ravel()
    if np.any(xs < 0) or np.any(s < 0):
        raise ValueError("sizes and times must be nonnegative")
    root = math.sqrt(rates.lam * rates.mu)
    C = (math.sqrt(rates.mu) - math.sqrt(rates.lam)) ** 2
    table = bessel_i_scaled_table(int(xs.max()), 2.0 * root * s)[:, xs]
    xf = xs.astype(float)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        logfac = 0.5 * xf * math.log(rates.mu / rates.lam) - s[:, None] * C
        pos = s[:, None] > 0
        out = np.where(pos, xf / np.where(pos, s[:, None], 1.0) * table * np.exp(logfac), 0.0)
    return out


def extinction_probability(rates: QueueRates, x: int) -> float:
    """``P_x(sigma < inf) = min(1, (mu/lam)^x)``."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0
    return min(1.0, (rates.mu / rates.lam) ** x)


def _tail_quad(rates: QueueRates, x: int, t: float) -> float:
    R = rates.lam + rates.mu
    C = rates.C

    def g(s):
        return float(extinction_density(rates, x, s))

    def g_sub(v, T):
        # s = T / v^2 maps [T, inf) onto (0, 1]
        if v == 0.0:
            if C > 0:
                return 0.0
            # limiting value of the substituted integrand as s -> inf
            return 2.0 * x * math.sqrt(T) / math.sqrt(4.0 * math.pi * math.sqrt(rates.lam * rates.mu)) \
                * (rates.mu / rates.lam) ** (x / 2.0)
        return g(T / v ** 2) * 2.0 * T / v ** 3

    total = 0.0
    err = 0.0
    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-11)
    start = t
    t_end = max(t, 50.0 / R)
    if C > 0:
        t_end = t_end + 60.0 / C
    # finite part on widening pieces
    w = min(max(t, 0.05 / R), 1.0 / C if C > 0 else np.inf)
    while start < t_end:
        stop = min(t_end, start + w)
        val, e = integrate.quad(g, start, stop, **opts)
        total += val
        err += e
        start = stop
        w *= 2.0
    val, e = integrate.quad(g_sub, 0.0, 1.0, args=(t_end,), **opts)
    total += val
    err += e
    if not np.isfinite(total) or err > max(1e-9, 1e-6 * abs(total)):
        raise QuadratureError(f"survival tail integral unresolved (estimate {total}, error {err})")
    return total


def survival_homogeneous(rates: QueueRates, x: int, t: float) -> float:
    """``P_x[sigma > t]`` for the homogeneous queue.

    Uses adaptive Gauss-Kronrod quadrature of the density tail
    ``int_t^inf``; when ``lam > mu`` the non-extinction mass
    ``1 - (mu/lam)^x`` is added.
    """
    if x < 0 or int(x) != x:
        raise ValueError("x must be a nonnegative integer")
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = int(x)
    if x == 0:
        return 0.0
    if t == 0:
        return 1.0
    tail = _tail_quad(rates, x, float(t))
    if rates.supercritical:
        return 1.0 - extinction_probability(rates, x) + tail
    return min(1.0, tail)


# fixed Gauss-Legendre rule for the grid engine
_PANEL_ORDER = 24
_PN, _PW = np.polynomial.legendre.leggauss(_PANEL_ORDER)
_SUB_ORDER = 64
_SN, _SW = np.polynomial.legendre.leggauss(_SUB_ORDER)


def _panel_edges(a, b, w0):
    edges = [a]
    w = w0
    while edges[-1] < b:
        edges.append(min(b, edges[-1] + w))
        w *= 2.0
    return np.asarray(edges)


def _nodes_on(edges):
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (lo[:, None] + half[:, None] * (_PN[None, :] + 1.0)).ravel()
    weights = (half[:, None] * _PW[None, :]).ravel()
    return nodes, weights


def _grid_plan(rates_list, t_points):
    """Common quadrature nodes for survival on a sorted grid of times.

    Returns interval nodes/weights with the index of the grid interval each
    node belongs to, and the cut point where the substituted tail starts.
    """
    R = max(r.lam + r.mu for r in rates_list)
    Cs = [r.C for r in rates_list]
    C_min_pos = min([c for c in Cs if c > 0], default=0.0)
    t_max = float(t_points[-1])
    t_end = max(t_max, 50.0 / R)
    if C_min_pos > 0:
        t_end += 60.0 / C_min_pos
    cuts = np.append(t_points, t_end)
    nodes, weights, owner = [], [], []
    for i in range(cuts.size - 1):
        a, b = cuts[i], cuts[i + 1]
        if b <= a:
            continue
        w0 = max(a, 0.05 / R)
        if C_min_pos > 0:
            w0 = min(w0, 1.0 / max(Cs))
        nd, wt = _nodes_on(_panel_edges(a, b, w0))
        nodes.append(nd)
        weights.append(wt)
        owner.append(np.full(nd.size, i))
    if nodes:
        nodes = np.concatenate(nodes)
        weights = np.concatenate(weights)
        owner = np.concatenate(owner)
    else:
        nodes = weights = np.zeros(0)
        owner = np.zeros(0, dtype=int)
    return nodes, weights, owner, t_end


def _substituted_tail(rates: QueueRates, xs, T):
    # int_T^inf g(s) ds = int_0^1 g(T / v^2) 2 T / v^3 dv
    v = 0.5 * (_SN + 1.0)
    w = 0.5 * _SW
    s = T / v ** 2
    dens = extinction_density(rates, xs[None, :], s[:, None])
    return ((2.0 * T / v ** 3)[:, None] * dens * w[:, None]).sum(axis=0)


def survival_grid(rates: QueueRates, xs, ts, plan=None):
    """Survival ``P_x[sigma > t]`` for every ``t`` in ``ts`` and ``x`` in ``xs``.

    A vectorized fixed-rule alternative to :func:`survival_homogeneous`:
    the density is integrated on doubling Gauss-Legendre panels between
    consecutive grid times and the remaining tail is mapped to ``(0, 1]``.
    Returns an array of shape ``(len(ts), len(xs))``.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if np.any(ts < 0):
        raise ValueError("times must be nonnegative")
    order = np.argsort(ts)
    t_sorted = ts[order]
    if plan is None:
        plan = _grid_plan([rates], t_sorted)
    nodes, weights, owner, t_end = plan
    dens = extinction_density(rates, xs[None, :], nodes[:, None]) if nodes.size else np.zeros((0, xs.size))
    pieces = np.zeros((t_sorted.size, xs.size))
    if nodes.size:
        np.add.at(pieces, owner, dens * weights[:, None])
    tail = _substituted_tail(rates, xs.astype(float), t_end)
    # survival at t_i = sum of pieces from i onwards + tail
    surv = np.cumsum(pieces[::-1], axis=0)[::-1] + tail[None, :]
    if rates.supercritical:
        surv = surv + 1.0 - np.minimum(1.0, (rates.mu / rates.lam) ** xs.astype(float))[None, :]
    surv = np.where(xs[None, :] == 0, 0.0, surv)
    surv = np.minimum(surv, 1.0)
    out = np.empty_like(surv)
    out[order] = surv
    return out


def survival_tail_asymptotic(rates: QueueRates, x: int, T: float) -> float:
    """Large-``T`` equivalent of ``P_x[sigma > T]`` for ``lam <= mu``.

    For ``lam < mu`` this is
    ``(mu/lam)^(x/2) x / sqrt(pi sqrt(lam mu)) [e^{-TC}/sqrt(T) - sqrt(C) Gamma(1/2, TC)]``;
    the bracket equals ``sqrt(C) Gamma(-1/2, TC) / 2`` and is evaluated in
    that form once ``TC`` is large enough for the difference to cancel.
    For ``lam == mu`` it is ``x / sqrt(pi lam T)``.
    """
    if rates.supercritical:
        raise ValueError("tail asymptotic requires lam <= mu")
    if x < 1 or T <= 0:
        raise ValueError("need x >= 1 and T > 0")
    if rates.is_critical:
        return x / math.sqrt(math.pi * rates.lam * T)
    C = rates.C
    u = T * C
    bracket = math.exp(-u) / math.sqrt(T) - math.sqrt(C) * upper_gamma(0.5, u)
    if u > 1.0 or bracket <= 0.0:
        bracket = 0.5 * math.sqrt(C) * upper_gamma_any(-0.5, u)
    pref = (rates.mu / rates.lam) ** (x / 2.0) * x / math.sqrt(math.pi * math.sqrt(rates.lam * rates.mu))
    return pref * bracket


def survival_inhomogeneous(rates: QueueRates, schedule: RateSchedule, x: int, t: float) -> float:
    """``P_x[sigma > t]`` for the queue driven by ``alpha_t`` times the base rates."""
    return survival_homogeneous(rates, x, float(schedule.integral(t)))


# --------------------------------------------------------------------------
# simulation

def sample_extinction_times(rates: QueueRates, schedule: RateSchedule, x, size: int,
                            rng, cap: float = np.inf, track_peak=False):
    """Draw ``size`` extinction times of the inhomogeneous queue started at ``x``.

    The homogeneous walk is simulated exactly in operational time and the
    extinction instant is mapped back through ``A^{-1}``.  Times beyond
    ``cap`` seconds are reported as ``inf``.
    """
    x0 = np.broadcast_to(np.asarray(x, dtype=np.int64), (size,))
    op_cap = float(schedule.integral(cap)) if np.isfinite(cap) else np.inf
    res = _walks.hitting_times(x0, rates.lam, rates.mu, op_cap, rng, track_peak=track_peak)
    op_times, peaks = res if track_peak else (res, None)
    times = schedule.inverse(op_times)
    return (times, peaks) if track_peak else times


def simulate_extinction(rates: QueueRates, schedule: RateSchedule, x: int, seed,
                        cap: float) -> ExtinctionSample:
    """One exact extinction-time draw with its path peak (diagnostic)."""
    if x == 0:
        return ExtinctionSample(0.0, 0)
    if not cap > 0:
        raise ValueError("cap must be positive")
    rng = np.random.default_rng(seed)
    times, peaks = sample_extinction_times(rates, schedule, x, 1, rng, cap=cap, track_peak=True)
    return ExtinctionSample(float(times[0]), int(peaks[0]))
