"""Special functions used by the survival, race and meander formulas.

Modified Bessel functions of the first kind are only needed for integer
order.  They are computed from the integral representation

    I_n(z) = (1/pi) * int_0^pi exp(z cos t) cos(n t) dt

in the exponentially scaled form, with a power series for small arguments
and a backward ratio recurrence for orders where the integral suffers from
cancellation.  Everything broadcasts over numpy arrays.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

__all__ = [
    "bessel_i",
    "bessel_i_scaled",
    "bessel_i_scaled_table",
    "upper_gamma",
    "upper_gamma_any",
    "exp_integral_e1",
    "normal_pdf",
    "normal_cdf",
]

_SERIES_MAX_Z = 30.0
_SERIES_TERMS = 110
# e^{z(cos t - 1)} underflows once z (1 - cos t) exceeds this
_UNDERFLOW = 745.0
# the integral is well conditioned while exp(-n^2 / 2z) stays above ~e^-10
_CONDITION = 20.0
_CHUNK = 8192

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)


def _ive_series(n, z):
    # sum_k (z/2)^(2k+n) / (k! (n+k)!) * e^{-z}, started in log space
    logz2 = np.log(z / 2.0)
    lg = np.array([math.lgamma(v + 1.0) for v in n.ravel()]).reshape(n.shape)
    term = np.exp(n * logz2 - lg - z)
    total = term.copy()
    q = (z / 2.0) ** 2
    for k in range(_SERIES_TERMS):
        term = term * q / ((k + 1.0) * (n + k + 1.0))
        total += term
    return total


def _ive_quadrature(n, z):
    # scaled integral on [0, theta_c]; the integrand is negligible beyond
    cos_c = np.clip(1.0 - _UNDERFLOW / z, -1.0, 1.0)
    theta_c = np.arccos(cos_c)
    half = 0.5 * theta_c
    theta = half[:, None] * (_GL_NODES[None, :] + 1.0)
    # cos(t) - 1 = -2 sin^2(t/2), no cancellation at tiny t
    expo = -2.0 * z[:, None] * np.sin(0.5 * theta) ** 2
    vals = np.exp(expo) * np.cos(n[:, None] * theta)
    return half * (vals @ _GL_WEIGHTS) / np.pi


def _ive_recurrence(n, z):
    # I_n = I_m * prod_{k=m+1}^{n} r_k with r_k = I_k / I_{k-1}, where the
    # ratios come from the stable backward recurrence r_k = 1/(2k/z + r_{k+1})
    m = np.floor(np.sqrt(_CONDITION * z)).astype(float)
    base = _ive_quadrature(m, z)
    top = int(np.max(n + 40.0 + 6.0 * np.sqrt(z)))
    r = np.zeros_like(z)
    log_prod = np.zeros_like(z)
    for k in range(top, 0, -1):
        r = 1.0 / (2.0 * k / z + r)
        active = (k > m) & (k <= n)
        log_prod = np.where(active, log_prod + np.log(r), log_prod)
    return base * np.exp(log_prod)


def bessel_i_scaled(order, z):
    """Exponentially scaled modified Bessel function ``exp(-z) * I_order(z)``.

    Parameters
    ----------
    order : int or array_like of int
        Nonnegative integer order.
    z : float or array_like
        Nonnegative argument.

    Returns
    -------
    float or ndarray
        Finite for every ``z >= 0``; behaves like ``1/sqrt(2 pi z)`` for
        large ``z``.
    """
    n_in = np.asarray(order)
    z_in = np.asarray(z, dtype=float)
    if np.any(n_in < 0) or np.any(n_in != np.floor(n_in)):
        raise ValueError("order must be a nonnegative integer")
    if np.any(z_in < 0):
        raise ValueError("z must be nonnegative")
    n_b, z_b = np.broadcast_arrays(n_in.astype(float), z_in)
    n = n_b.ravel()
    zz = z_b.ravel()
    out = np.empty_like(zz)

    zero = zz == 0.0
    out[zero] = np.where(n[zero] == 0.0, 1.0, 0.0)

    series = ~zero & (zz <= _SERIES_MAX_Z)
    if series.any():
        out[series] = _ive_series(n[series], zz[series])

    big = ~zero & ~series
    good = big & (n * n <= _CONDITION * zz)
    hard = big & ~good
    for mask, fn in ((good, _ive_quadrature), (hard, _ive_recurrence)):
        idx = np.flatnonzero(mask)
        # chunks bound the (points x nodes) work arrays
        for lo in range(0, idx.size, _CHUNK):
            j = idx[lo:lo + _CHUNK]
            out[j] = fn(n[j], zz[j])

    out = out.reshape(z_b.shape)
    return out[()] if out.ndim == 0 else out


def _ive_asymptotic_table(n_max, z, terms=12):
    # e^{-z} I_n(z) ~ (2 pi z)^{-1/2} sum_k (-1)^k prod_{j<=k} (4n^2 - (2j-1)^2) / (8 z j)
    mu = 4.0 * np.arange(n_max + 1, dtype=float)[None, :] ** 2
    zz = z[:, None]
    term = np.ones((z.size, n_max + 1))
    total = term.copy()
    for j in range(1, terms + 1):
        term = -term * (mu - (2.0 * j - 1.0) ** 2) / (8.0 * zz * j)
        total += term
    return total / np.sqrt(2.0 * np.pi * zz)


def _ive_ratio_table(n_max, z):
    # I_0 by quadrature, then I_n = I_0 prod_{k<=n} r_k with backward ratios
    base = _ive_quadrature(np.zeros_like(z), z)
    top = int(np.max(n_max + 40.0 + 6.0 * np.sqrt(z)))
    r = np.zeros_like(z)
    ratios = np.empty((z.size, n_max + 1))
    ratios[:, 0] = 1.0
    for k in range(top, 0, -1):
        r = 1.0 / (2.0 * k / z + r)
        if k <= n_max:
            ratios[:, k] = r
    return base[:, None] * np.cumprod(ratios, axis=1)


def bessel_i_scaled_table(n_max: int, z):
    """``exp(-z) I_n(z)`` for every order ``0..n_max`` at each ``z``.

    Returns an array of shape ``(len(z), n_max + 1)``.  Much cheaper than
    :func:`bessel_i_scaled` on an outer grid, since the work per argument
    is shared by all orders.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    if np.any(z < 0):
        raise ValueError("z must be nonnegative")
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    out = np.zeros((z.size, n_max + 1))
    out[z == 0.0, 0] = 1.0
    orders = np.arange(n_max + 1, dtype=float)
    small = (z > 0) & (z <= _SERIES_MAX_Z)
    large = z >= max(_SERIES_MAX_Z, 25.0 * (n_max + 1.0) ** 2)
    middle = (z > _SERIES_MAX_Z) & ~large
    for mask, kind in ((small, 0), (middle, 1), (large, 2)):
        idx = np.flatnonzero(mask)
        step = max(1, _CHUNK * 8 // (n_max + 1))
        for lo in range(0, idx.size, step):
            j = idx[lo:lo + step]
            if kind == 0:
                n_g, z_g = np.broadcast_arrays(orders[None, :], z[j][:, None])
                out[j] = _ive_series(n_g.ravel(), z_g.ravel()).reshape(n_g.shape)
            elif kind == 1:
                out[j] = _ive_ratio_table(n_max, z[j])
            else:
                out[j] = _ive_asymptotic_table(n_max, z[j])
    return out


def bessel_i(order, z):
    """Modified Bessel function of the first kind ``I_order(z)``.

    Raises ``OverflowError`` when ``exp(z)`` is not representable; use
    :func:`bessel_i_scaled` for large arguments.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr > 709.0):
        raise OverflowError("I_n(z) overflows for z > 709; use bessel_i_scaled")
    return bessel_i_scaled(order, z_arr) * np.exp(z_arr)


def _lower_gamma_series(s, x):
    # gamma(s, x) = x^s e^{-x} sum_k x^k / (s (s+1) ... (s+k))
    term = 1.0 / s
    total = term
    for k in range(1, 1000):
        term *= x / (s + k)
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + s * math.log(x))


def _upper_gamma_cf(s, x):
    # modified Lentz on the continued fraction of Gamma(s, x); valid for x > s - 1
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        a = -i * (i - s)
        b += 2.0
        d = a * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + a / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + s * math.log(x)) * h


def upper_gamma(s: float, x: float) -> float:
    """Upper incomplete gamma ``int_x^inf u^(s-1) e^-u du`` for ``s > 0``."""
    if s <= 0:
        raise ValueError("s must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return math.gamma(s)
    if x > s + 1.0:
        return _upper_gamma_cf(s, x)
    return math.gamma(s) - _lower_gamma_series(s, x)


def upper_gamma_any(s: float, x: float) -> float:
    """``int_x^inf u^(s-1) e^-u du`` for any real ``s`` and ``x > 0``.

    Negative ``s`` is reduced to positive order through
    ``Gamma(s, x) = (Gamma(s+1, x) - x^s e^-x) / s``, except for large ``x``
    where the continued fraction is used directly to avoid cancellation.
    """
    if x <= 0:
        raise ValueError("x must be positive")
    if s > 0:
        return upper_gamma(s, x)
    if x > max(1.0, s + 1.0):
        return _upper_gamma_cf(s, x)
    if s == 0:
        return exp_integral_e1(x)
    return (upper_gamma_any(s + 1.0, x) - math.exp(-x + s * math.log(x))) / s


def exp_integral_e1(u: float) -> float:
    """Exponential integral ``E1(u) = int_u^inf e^-w / w dw`` for ``u > 0``."""
    if u <= 0:
        raise ValueError("u must be positive")
    if u <= 1.0:
        # -gamma - ln u - sum_k (-u)^k / (k k!)
        total = 0.0
        term = 1.0
        for k in range(1, 200):
            term *= -u / k
            contrib = term / k
            total += contrib
            if abs(contrib) < 1e-18:
                break
        return -np.euler_gamma - math.log(u) - total
    return _upper_gamma_cf(0.0, u)


def normal_pdf(t, x):
    """Density of a centered Gaussian with variance ``t`` at ``x``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("variance must be positive")
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x / t) / np.sqrt(2.0 * np.pi * t)
    return out[()] if out.ndim == 0 else out


def normal_cdf(t, x):
    """Distribution function of a centered Gaussian with variance ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("variance must be positive")
    x = np.asarray(x, dtype=float)
    out = ndtr(x / np.sqrt(t))
    return out[()] if out.ndim == 0 else out
