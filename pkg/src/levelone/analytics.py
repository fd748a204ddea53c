"""Closed-form and quadrature quantities of the book model.

Covers the probability of an up-move, the law and tails of the time to the
next price change, the long-run constants ``c0``/``c1``, the two-state sign
chain, the diffusive volatility, the index-1 stable exponent and the
Brownian meander transition density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import erf

from .birth_death import (
    QuadratureError,
    QueueRates,
    extinction_density_table,
    survival_grid,
)
from .lob import ModelConfig, RedrawDistribution, validate_config
from .specfun import normal_pdf, upper_gamma, upper_gamma_any

__all__ = [
    "LimitConstants",
    "SignChainStats",
    "GeneratorCheck",
    "p_up",
    "p_up_matrix",
    "tau1_survival",
    "tau1_tail",
    "expected_tau1_homogeneous",
    "EpochMoments",
    "epoch_moments",
    "expected_tau1_given",
    "limit_constants",
    "sign_chain",
    "sign_chain_from_matrix",
    "sigma_tilde",
    "stable_exponent",
    "meander_density",
    "meander_mass",
    "meander_chapman_kolmogorov",
    "meander_generator_check",
]

# amplification (mu_a/lam_a)^(y/2) beyond which the oscillatory integral
# loses too many digits and the positive integration route is used instead
_AMPLIFICATION_LIMIT = 1e4
_NEAR_ZERO = [10.0 ** -k for k in range(9, 0, -1)]


# --------------------------------------------------------------------------
# time grids for integrals over (0, inf)

_PN, _PW = np.polynomial.legendre.leggauss(24)
_TN, _TW = np.polynomial.legendre.leggauss(64)
_SN, _SW = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class _TimeGrid:
    """Nodes on ``(0, inf)``: GL panels on ``(0, T]`` then ``t = T / v^2``."""

    panel_nodes: np.ndarray
    panel_weights: np.ndarray
    T: float
    v_nodes: np.ndarray  # increasing in v, so decreasing in t
    v_weights: np.ndarray

    @property
    def nodes(self):
        return np.concatenate([self.panel_nodes, self.T / self.v_nodes[::-1] ** 2])

    @property
    def weights(self):
        vw = (self.v_weights * 2.0 * self.T / self.v_nodes ** 3)[::-1]
        return np.concatenate([self.panel_weights, vw])


def _time_grid(rates_list, x_max: int) -> _TimeGrid:
    R = min(r.lam + r.mu for r in rates_list)
    drift = min(max(r.mu - r.lam, 0.0) for r in rates_list)
    scale = x_max * x_max / R
    if drift > 0:
        scale = min(scale, x_max / drift + 10.0 * math.sqrt(x_max * R) / drift)
    T = max(50.0 / R, 4.0 * scale)
    c_pos = [r.C for r in rates_list if r.C > 0]
    if c_pos:
        # keep the exponential cutoff inside the panels; near criticality it
        # would otherwise sit below the first node of the substituted tail
        T = max(T, min(40.0 / min(c_pos), 1e18 / R))
    edges = [0.0]
    w = 0.02 / max(r.lam + r.mu for r in rates_list)
    while edges[-1] < T:
        edges.append(min(T, edges[-1] + w))
        w = min(2.0 * w, T / 32.0)
    edges = np.asarray(edges)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (lo[:, None] + half[:, None] * (_PN[None, :] + 1.0)).ravel()
    weights = (half[:, None] * _PW[None, :]).ravel()
    return _TimeGrid(nodes, weights, T, 0.5 * (_TN + 1.0), 0.5 * _TW)


def _interval_masses(func, pts):
    # int over [pts[i], pts[i+1]] of func, 8-point GL on each piece
    a, b = pts[:-1], pts[1:]
    half = 0.5 * (b - a)
    x = a[:, None] + half[:, None] * (_SN[None, :] + 1.0)
    vals = func(x.ravel()).reshape(x.shape + (-1,))
    return np.einsum("ik,ikj->ij", half[:, None] * _SW[None, :], vals)


def _survival_at(rates: QueueRates, xs, grid: _TimeGrid):
    """Survival of each start size at every node of ``grid``; shape ``(len(xs), n_nodes)``.

    Masses of the density between consecutive nodes are accumulated from
    infinity downwards, the tail piece in the variable ``v``.
    """
    xs_f = np.asarray(xs, dtype=float)
    T = grid.T
    dens_t = lambda t: extinction_density_table(rates, xs, t)
    dens_v = lambda v: extinction_density_table(rates, xs, T / v ** 2) * (2.0 * T / v ** 3)[:, None]
    v_pts = np.concatenate([[0.0], grid.v_nodes, [1.0]])
    m_v = _interval_masses(dens_v, v_pts)          # pieces ordered by increasing v
    surv_v = np.cumsum(m_v, axis=0)                # mass in (0, v_k]: survival at T/v_k^2
    tail_T = surv_v[-1]                            # survival at T
    t_pts = np.concatenate([grid.panel_nodes, [T]])
    m_t = _interval_masses(dens_t, t_pts)
    surv_t = np.cumsum(m_t[::-1], axis=0)[::-1] + tail_T[None, :]
    out = np.concatenate([surv_t, surv_v[:-1][::-1]], axis=0)
    if rates.supercritical:
        out = out + 1.0 - np.minimum(1.0, (rates.mu / rates.lam) ** xs_f)[None, :]
    return np.minimum(out, 1.0).T


# --------------------------------------------------------------------------
# probability of a price increase

def _check_sub(rates_ask: QueueRates, rates_bid: QueueRates):
    if rates_ask.supercritical or rates_bid.supercritical:
        raise ValueError("the up-move integral needs lam <= mu on both sides")


def _p_up_integral(x: int, y: int, ra: QueueRates, rb: QueueRates) -> float:
    sig = ra.mu + rb.mu + ra.lam + rb.lam
    root_a = math.sqrt(ra.lam * ra.mu)
    k = root_a / (ra.mu + ra.lam)

    def integrand(t):
        G = sig - 2.0 * root_a * math.cos(t)
        r = math.sqrt(max(G * G - 4.0 * rb.lam * rb.mu, 0.0))
        # H = (G - r) / (2 lam_b), written without cancellation
        H = 2.0 * rb.mu / (G + r)
        # (2 lam_b H - G) / r == -1 identically, so the two braces reduce to
        # 1 / (1 - 2k cos t); 1 - 2k cos t = (1 - 2k) + 4k sin^2(t/2)
        # this form has no cancellation, so only t = 0 itself needs care
        den = (1.0 - 2.0 * k) + 4.0 * k * math.sin(0.5 * t) ** 2
        if den == 0.0:
            return 2.0 * y * H ** x  # removable point, critical ask side
        return H ** x * math.sin(y * t) * math.sin(t) / den

    # near criticality H_t and the denominator vary on tiny scales at t = 0
    val, err = integrate.quad(integrand, 0.0, math.pi, points=_NEAR_ZERO, limit=400,
                              epsabs=1e-14, epsrel=1e-12)
    amp = (ra.mu / ra.lam) ** (y / 2.0) * 2.0 * k / math.pi
    if not np.isfinite(val) or amp * err > 1e-9:
        raise QuadratureError(f"up-move integral unresolved at x={x}, y={y} (error {amp * err:.2e})")
    return 1.0 - amp * val


def p_up_matrix(xs, ys, rates_ask: QueueRates, rates_bid: QueueRates) -> np.ndarray:
    """``p_up(x, y)`` for every ``x`` in ``xs`` and ``y`` in ``ys``.

    Integration route: ``P(sigma_a < sigma_b) = int g_a(t; y) u_b(t; x) dt``
    with the exact extinction density of the ask queue and the survival
    function of the bid queue.  Valid whenever at least one side is
    subcritical or critical; the integrand is positive, so there is no
    cancellation.  Returns shape ``(len(xs), len(ys))``.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
    ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
    if np.any(xs < 1) or np.any(ys < 1):
        raise ValueError("sizes must be at least 1")
    if rates_ask.supercritical and rates_bid.supercritical:
        raise ValueError("both queues supercritical")
    grid = _time_grid([rates_ask, rates_bid], int(max(xs.max(), ys.max())))
    ub = _survival_at(rates_bid, xs, grid)
    ga = extinction_density_table(rates_ask, ys, grid.nodes).T * grid.weights[None, :]
    return np.clip(ub @ ga.T, 0.0, 1.0)


def p_up(x: int, y: int, rates_ask: QueueRates, rates_bid: QueueRates, *,
         method: str = "auto") -> float:
    """Probability that the next price change is an increase.

    Parameters
    ----------
    x, y : int
        Current bid and ask queue sizes (>= 1).
    rates_ask, rates_bid : QueueRates
        Base rates; ``lam <= mu`` is required on both sides.
    method : {"auto", "integral", "integration"}
        ``"integral"`` evaluates the one-dimensional integral over
        ``(0, pi)`` with the prefactor ``(mu_a/lam_a)^(y/2)``;
        ``"integration"`` integrates the ask extinction density against the
        bid survival function.  ``"auto"`` uses the former unless the
        prefactor would amplify rounding error beyond ``1e4``.

    Returns
    -------
    float
        Value in ``[0, 1]``.  The same value holds under any proportional
        time change, since both queues share the clock.
    """
    if x < 1 or y < 1:
        raise ValueError("sizes must be at least 1")
    _check_sub(rates_ask, rates_bid)
    if method == "auto":
        amp = (rates_ask.mu / rates_ask.lam) ** (y / 2.0)
        method = "integral" if amp <= _AMPLIFICATION_LIMIT else "integration"
    if method == "integral":
        return float(min(1.0, max(0.0, _p_up_integral(int(x), int(y), rates_ask, rates_bid))))
    if method == "integration":
        return float(p_up_matrix([x], [y], rates_ask, rates_bid)[0, 0])
    raise ValueError(f"unknown method {method!r}")


def _p_up_printed_exponent(x: int, y: int, ra: QueueRates, rb: QueueRates) -> float:
    # the displayed prefactor (mu_a/lam_a)^y instead of ^(y/2); kept only to
    # document that it disagrees with simulation when lam_a != mu_a
    val = _p_up_integral(x, y, ra, rb)
    return 1.0 - (1.0 - val) * (ra.mu / ra.lam) ** (y / 2.0)


# --------------------------------------------------------------------------
# time to the next price change

def tau1_survival(config: ModelConfig, x: int, y: int, t):
    """``P(tau_1 > t | bid x, ask y)``: product of the two queue survivals at ``A_t``."""
    if x < 1 or y < 1:
        raise ValueError("sizes must be at least 1")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.asarray(config.schedule.integral(t_arr), dtype=float)
    out = survival_grid(config.rates_bid, [x], s)[:, 0] * survival_grid(config.rates_ask, [y], s)[:, 0]
    out = np.where(s == 0, 1.0, out)
    return float(out[0]) if np.ndim(t) == 0 else out


def _bracket(A: float, C: float) -> float:
    # e^{-AC}/sqrt(A) - sqrt(C) Gamma(1/2, AC) = sqrt(C) Gamma(-1/2, AC) / 2
    if C == 0.0:
        return 1.0 / math.sqrt(A)
    u = A * C
    direct = math.exp(-u) / math.sqrt(A) - math.sqrt(C) * upper_gamma(0.5, u)
    if u > 1.0 or direct <= 0.0:
        return 0.5 * math.sqrt(C) * upper_gamma_any(-0.5, u)
    return direct


def tau1_tail(config: ModelConfig, x: int, y: int, T: float, *, printed: bool = True) -> float:
    """Large-``T`` equivalent of ``P(tau_1 > T | bid x, ask y)``.

    Both sides with ``lam <= mu`` use the product form.  With exactly one
    supercritical side the one-sided forms apply; they are evaluated with
    the constant ``1/pi`` as displayed in the source when ``printed`` is
    True, and with ``1/sqrt(pi)``, the value the one-queue asymptotics
    produce, otherwise.
    """
    ra, rb = config.rates_ask, config.rates_bid
    if ra.supercritical and rb.supercritical:
        raise ValueError("both queues supercritical: no price change with positive probability")
    A = float(config.schedule.integral(T))
    if not A > 0:
        raise ValueError("A_T must be positive")

    def side(r: QueueRates, n: int) -> float:
        return (r.mu / r.lam) ** (n / 2.0) * n / (r.lam * r.mu) ** 0.25 * _bracket(A, r.C)

    if not ra.supercritical and not rb.supercritical:
        return side(rb, x) * side(ra, y) / math.pi
    const = math.pi if printed else math.sqrt(math.pi)
    if rb.supercritical:
        return (1.0 - (rb.mu / rb.lam) ** x) * side(ra, y) / const
    return (1.0 - (ra.mu / ra.lam) ** y) * side(rb, x) / const


def expected_tau1_given(x: int, y: int, rates_ask: QueueRates, rates_bid: QueueRates) -> float:
    """``E(tau_1 | bid x, ask y) = int_0^inf u_b(t; x) u_a(t; y) dt`` (operational time)."""
    return expected_tau1_homogeneous(RedrawDistribution.degenerate(x, y), rates_ask, rates_bid)


def _tau1_pieces(f: RedrawDistribution, rates_ask: QueueRates, rates_bid: QueueRates,
                 with_up: bool):
    # per support point: int u_b u_a dt, int 2t u_b u_a dt, and optionally
    # int g_a u_b dt and int t g_a u_b dt; time in units of 1/R
    if rates_ask.supercritical and rates_bid.supercritical:
        raise ValueError("both queues supercritical")
    keep = f.probs > 0
    px, py, pp = f.xs[keep], f.ys[keep], f.probs[keep]
    ux, ix = np.unique(px, return_inverse=True)
    uy, iy = np.unique(py, return_inverse=True)
    # time in units of the total rate, so that a common rescaling of every
    # rate changes the result by exactly that factor
    R = rates_ask.lam + rates_ask.mu + rates_bid.lam + rates_bid.mu
    ra_n = rates_ask.scaled(1.0 / R)
    rb_n = rates_bid.scaled(1.0 / R)
    grid = _time_grid([ra_n, rb_n], int(max(ux.max(), uy.max())))
    ub = _survival_at(rb_n, ux, grid)[ix]
    ua = _survival_at(ra_n, uy, grid)[iy]
    t, w = grid.nodes, grid.weights
    out = {"R": R, "probs": pp, "m1": np.einsum("kt,kt,t->k", ub, ua, w)}
    if with_up:
        ga = extinction_density_table(ra_n, uy, t).T[iy]
        out["m2"] = np.einsum("kt,kt,t->k", ub, ua, 2.0 * t * w)
        out["up"] = np.einsum("kt,kt,t->k", ub, ga, w)
        out["t_up"] = np.einsum("kt,kt,t->k", ub, ga, t * w)
    return out


def expected_tau1_homogeneous(f: RedrawDistribution, rates_ask: QueueRates,
                              rates_bid: QueueRates) -> float:
    """Mean time to the next price change with sizes drawn from ``f``.

    Computed as ``sum f(x, y) int_0^inf u_b(t; x) u_a(t; y) dt`` on a common
    quadrature grid.  Requires ``C_a + C_b > 0``; in the critical case the
    mean is infinite and ``ValueError`` is raised.
    """
    if rates_ask.C + rates_bid.C == 0.0:
        raise ValueError("E(tau_1) diverges when C_a + C_b = 0")
    pc = _tau1_pieces(f, rates_ask, rates_bid, with_up=False)
    out = float(np.dot(pc["probs"], pc["m1"])) / pc["R"]
    if not np.isfinite(out):
        raise QuadratureError("E(tau_1) integral did not converge")
    return out


@dataclass(frozen=True)
class EpochMoments:
    """Joint moments of one epoch ``(xi, tau)`` with sizes drawn from ``f`` (operational time)."""

    mean_tau: float
    var_tau: float
    mean_xi: float
    var_xi: float
    cov_xi_tau: float

    @property
    def renewal_reward_variance(self) -> float:
        """``Var(xi - (E xi / E tau) tau) / E tau``: the exact diffusive variance for i.i.d. epochs."""
        r = self.mean_xi / self.mean_tau
        return (self.var_xi - 2.0 * r * self.cov_xi_tau + r * r * self.var_tau) / self.mean_tau


def epoch_moments(f: RedrawDistribution, rates_ask: QueueRates, rates_bid: QueueRates,
                  delta: float = 1.0) -> EpochMoments:
    """Mean and variance of ``tau_1``, and its covariance with the price move ``xi_1``.

    Uses ``E tau^2 = int 2t P(tau > t) dt`` and
    ``E(tau; up) = int t g_a(t; y) u_b(t; x) dt``.  When ``f_tilde`` is ``f``
    the epochs are i.i.d. and :attr:`EpochMoments.renewal_reward_variance`
    is the exact limit of ``Var(S_t)/t``.
    """
    if rates_ask.C + rates_bid.C == 0.0:
        raise ValueError("moments of tau_1 diverge when C_a + C_b = 0")
    pc = _tau1_pieces(f, rates_ask, rates_bid, with_up=True)
    p, R = pc["probs"], pc["R"]
    m1 = float(p @ pc["m1"]) / R
    m2 = float(p @ pc["m2"]) / R ** 2
    up = float(p @ pc["up"])
    t_up = float(p @ pc["t_up"]) / R
    mean_xi = delta * (2.0 * up - 1.0)
    e_xi_tau = delta * (2.0 * t_up - m1)
    return EpochMoments(m1, m2 - m1 * m1, mean_xi, delta * delta - mean_xi ** 2,
                        e_xi_tau - mean_xi * m1)


# --------------------------------------------------------------------------
# sign chain and limit constants

@dataclass(frozen=True)
class SignChainStats:
    """Two-state chain of price-change signs, states ordered ``(-delta, +delta)``."""

    Pi: np.ndarray
    nu: float
    mean_xi: float
    sigma2: float
    eta: float
    delta: float
    sigma2_series: float


def _series_sigma2(Pi: np.ndarray, nu: float, delta: float, k_max: int = 64) -> float:
    # variance formula with both series truncated at k_max matrix powers
    s11 = s21 = 0.0
    P = np.eye(2)
    for _ in range(k_max):
        P = P @ Pi
        s11 += P[0, 0] - nu
        s21 += P[1, 0] - nu
    return 4.0 * delta ** 2 * (nu * (1.0 - nu) + nu * s11 - (1.0 - nu) * s21)


def sign_chain_from_matrix(Pi, delta: float = 1.0, *, row_tol: float = 1e-4) -> SignChainStats:
    """Stationary law and long-run variance of a given 2x2 sign chain.

    ``row_tol`` admits matrices whose rows were rounded before being
    reported.  ``nu`` uses the off-diagonal entries only.
    """
    Pi = np.asarray(Pi, dtype=float)
    if Pi.shape != (2, 2) or np.any(Pi < 0) or np.any(Pi > 1):
        raise ValueError("Pi must be a 2x2 matrix of probabilities")
    if np.any(np.abs(Pi.sum(axis=1) - 1.0) > row_tol):
        raise ValueError("rows of Pi must sum to 1")
    p12, p21 = Pi[0, 1], Pi[1, 0]
    eta = 1.0 - p12 - p21
    if p12 + p21 <= 0.0 or p12 + p21 >= 2.0:
        raise ValueError("sign chain is not ergodic (eta = +-1)")
    nu = p21 / (p12 + p21)
    sigma2 = 4.0 * delta ** 2 * nu * (1.0 - nu) * (1.0 + eta) / (1.0 - eta)
    return SignChainStats(Pi=Pi, nu=float(nu), mean_xi=float(delta * (1.0 - 2.0 * nu)),
                          sigma2=float(sigma2), eta=float(eta), delta=float(delta),
                          sigma2_series=float(_series_sigma2(Pi, nu, delta)))


def _mass_cut(dist: RedrawDistribution, tol: float = 1e-13):
    # drop the far tail of f (mass below tol) before building p_up tables
    order = np.argsort(dist.probs)
    cum = np.cumsum(dist.probs[order])
    drop = order[cum < tol]
    keep = np.ones(dist.probs.size, dtype=bool)
    keep[drop] = False
    return dist.xs[keep], dist.ys[keep], dist.probs[keep]


def _mean_p_up(dists, rates_ask: QueueRates, rates_bid: QueueRates):
    parts = [_mass_cut(d) for d in dists]
    ux = np.unique(np.concatenate([p[0] for p in parts]))
    uy = np.unique(np.concatenate([p[1] for p in parts]))
    table = p_up_matrix(ux, uy, rates_ask, rates_bid)
    out = []
    for xs, ys, ps in parts:
        i = np.searchsorted(ux, xs)
        j = np.searchsorted(uy, ys)
        out.append(float(np.dot(ps, table[i, j]) / ps.sum()))
    return out


def sign_chain(f: RedrawDistribution, f_tilde: RedrawDistribution, rates_ask: QueueRates,
               rates_bid: QueueRates, delta: float = 1.0) -> SignChainStats:
    """Sign chain implied by the model.

    ``P(up | last up) = sum f p_up`` and ``P(up | last down) = sum f_tilde p_up``.
    """
    if rates_ask.supercritical and rates_bid.supercritical:
        raise ValueError("both queues supercritical")
    dists = [f] if f_tilde is f else [f, f_tilde]
    vals = _mean_p_up(dists, rates_ask, rates_bid)
    up_after_up = vals[0]
    up_after_down = vals[-1]
    Pi = np.array([[1.0 - up_after_down, up_after_down],
                   [1.0 - up_after_up, up_after_up]])
    return sign_chain_from_matrix(Pi, delta, row_tol=1e-12)


@dataclass(frozen=True)
class LimitConstants:
    """Long-run constants of the counting process.

    ``c1`` (diffusive regime) is the mean calendar time per price change;
    ``c0`` (critical regime) is the constant of ``T P(tau_1 > T) -> c0``.
    """

    regime: str
    c0: float | None
    c1: float | None
    gamma0: float
    gamma1: float
    v: float
    expected_tau1: float | None


def limit_constants(config: ModelConfig) -> LimitConstants:
    """``c1 = E_Q(tau_1)/v`` or ``c0 = gamma0/(v pi sqrt(lam_a lam_b))``.

    When ``f_tilde`` differs from ``f`` the redraw law after a price change
    depends on its sign; the mean is then taken under the stationary mix
    ``nu f_tilde + (1 - nu) f``, which equals the ``f``-mean whenever the two
    laws give the same distribution of ``tau_1``.
    """
    validate_config(config)
    ra, rb = config.rates_ask, config.rates_bid
    v = config.schedule.v
    gamma0 = config.f.gamma0
    gamma1 = config.f.gamma1(ra, rb)
    mixed = config.f_tilde is not config.f
    nu = 0.0
    if mixed:
        nu = sign_chain(config.f, config.f_tilde, ra, rb, config.delta).nu
    if ra.is_critical and rb.is_critical:
        g0 = (1.0 - nu) * gamma0 + nu * config.f_tilde.gamma0 if mixed else gamma0
        c0 = g0 / (v * math.pi * math.sqrt(ra.lam * rb.lam))
        return LimitConstants("critical", c0, None, gamma0, gamma1, v, None)
    e_tau = expected_tau1_homogeneous(config.f, ra, rb)
    if mixed:
        e_tau = (1.0 - nu) * e_tau + nu * expected_tau1_homogeneous(config.f_tilde, ra, rb)
    return LimitConstants("diffusive", None, e_tau / v, gamma0, gamma1, v, e_tau)


def sigma_tilde(sigma2: float, mean_xi: float, c1: float) -> float:
    """Diffusive volatility per square-root second, ``sqrt(sigma2/c1 + mean_xi^2/c1^3)``."""
    if not c1 > 0:
        raise ValueError("c1 must be positive")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    return math.sqrt(sigma2 / c1 + mean_xi ** 2 / c1 ** 3)


def stable_exponent(zeta, c0: float, v: float):
    """``psi(zeta) = -|zeta| c0 v (pi/2 + i sgn(zeta) log|zeta|)``, with ``psi(0) = 0``."""
    z = np.asarray(zeta, dtype=float)
    a = np.abs(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_a = np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), 0.0)
    out = -a * c0 * v * (np.pi / 2.0 + 1j * np.sign(z) * log_a)
    return complex(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Brownian meander

def _half_mass(var, z):
    # Phi_var(z) - 1/2
    return 0.5 * erf(z / np.sqrt(2.0 * var))


def meander_density(s, x, t, y):
    """Transition density of the Brownian meander on ``(0, 1)``.

    ``{phi_{t-s}(y - x) - phi_{t-s}(y + x)} (Phi_{1-t}(y) - 1/2) / (Phi_{1-s}(x) - 1/2)``
    for ``0 < s < t < 1`` and ``x, y > 0``; broadcasts over ``y``.
    """
    if not (0.0 < s < t < 1.0):
        raise ValueError("need 0 < s < t < 1")
    if not x > 0:
        raise ValueError("x must be positive")
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be nonnegative")
    h = t - s
    # phi(y-x) - phi(y+x) = phi(y-x) (1 - exp(-2xy/h))
    kill = -np.expm1(-2.0 * x * y / h)
    out = normal_pdf(h, y - x) * kill * _half_mass(1.0 - t, y) / _half_mass(1.0 - s, x)
    return out[()] if np.ndim(out) == 0 else out


def meander_mass(s: float, x: float, t: float) -> float:
    """``int_0^inf meander_density(s, x, t, y) dy`` (equals 1)."""
    h = t - s
    hi = x + 40.0 * math.sqrt(h)
    val, _ = integrate.quad(lambda y: float(meander_density(s, x, t, y)), 0.0, hi,
                            points=[x], limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


def meander_chapman_kolmogorov(s: float, x: float, u: float, t: float, y: float):
    """Both sides of the Chapman-Kolmogorov identity through time ``u``.

    Returns ``(int p(s,x;u,z) p(u,z;t,y) dz, p(s,x;t,y))``.
    """
    if not (s < u < t):
        raise ValueError("need s < u < t")
    hi = max(x, y) + 40.0 * math.sqrt(t - s)
    f = lambda z: float(meander_density(s, x, u, z) * meander_density(u, z, t, y)) if z > 0 else 0.0
    val, _ = integrate.quad(f, 0.0, hi, points=sorted({x, y}), limit=400,
                            epsabs=1e-13, epsrel=1e-11)
    return val, float(meander_density(s, x, t, y))


@dataclass(frozen=True)
class GeneratorCheck:
    """Backward-equation residuals of the meander density under two drifts."""

    residual_printed: float
    residual_reference: float
    scale: float
    printed_consistent: bool


def meander_generator_check(s: float = 0.3, t: float = 0.7, y: float = 0.8,
                            xs=None, h: float = 1e-4, rtol: float = 1e-3) -> GeneratorCheck:
    """Test whether the meander density solves the backward equation.

    For ``p(s, x) = meander_density(s, x, t, y)`` the backward equation reads
    ``dp/ds + b(s, x) dp/dx + d2p/dx2 / 2 = 0``.  The residual is measured
    with the displayed drift ``1 + phi_{1-s}(x)`` and with the reference
    drift ``phi_{1-s}(x) / (Phi_{1-s}(x) - 1/2)`` (gradient of the log of the
    probability of staying positive).  Central differences with step ``h``.
    """
    xs = np.linspace(0.2, 2.0, 10) if xs is None else np.asarray(xs, dtype=float)
    p = lambda s_, x_: float(meander_density(s_, x_, t, y))
    res_p, res_r, scale = [], [], []
    for x in xs:
        ps = (p(s + h, x) - p(s - h, x)) / (2 * h)
        px = (p(s, x + h) - p(s, x - h)) / (2 * h)
        pxx = (p(s, x + h) - 2 * p(s, x) + p(s, x - h)) / (h * h)
        phi = float(normal_pdf(1.0 - s, x))
        b_printed = 1.0 + phi
        b_ref = phi / float(_half_mass(1.0 - s, x))
        res_p.append(abs(ps + b_printed * px + 0.5 * pxx))
        res_r.append(abs(ps + b_ref * px + 0.5 * pxx))
        scale.append(abs(ps) + abs(px) + abs(pxx))
    rp, rr, sc = max(res_p), max(res_r), max(scale)
    return GeneratorCheck(rp, rr, sc, rp <= rtol * sc)
