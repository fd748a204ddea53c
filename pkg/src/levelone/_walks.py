"""Vectorized exact simulation of +-1 queue walks in operational time.

Paths are advanced in blocks of jumps at once: a block draws the jump signs
and exponential holding times for every live path, locates the first visit
to zero with an ``argmax`` and retires finished paths.  Block length grows
as the live set shrinks, so heavy-tailed survivors cost few Python-level
iterations.
"""
from __future__ import annotations

import numpy as np

# elements per block array; bounds memory at a few tens of MB
_BLOCK_BUDGET = 2_000_000
_MAX_BLOCK = 8192


def _block_len(m: int) -> int:
    return int(max(4, min(_MAX_BLOCK, _BLOCK_BUDGET // max(m, 1))))


def hitting_times(x0, lam: float, mu: float, cap: float, rng, track_peak=False):
    """First passage times to 0 of a walk with up-rate ``lam`` and down-rate ``mu``.

    Returns an array of times (``inf`` when the walk is still positive at
    ``cap``) and, if requested, the running maximum reached before the hit.
    """
    x0 = np.asarray(x0, dtype=np.int64).ravel()
    n = x0.size
    times = np.full(n, np.inf)
    times[x0 == 0] = 0.0
    peaks = x0.copy()
    idx = np.flatnonzero(x0 > 0)
    pos = x0[idx]
    clock = np.zeros(idx.size)
    rate = lam + mu
    p_up = lam / rate
    while idx.size:
        m = idx.size
        b = _block_len(m)
        steps = np.where(rng.random((m, b)) < p_up, 1, -1).astype(np.int64)
        path = pos[:, None] + np.cumsum(steps, axis=1)
        t = clock[:, None] + np.cumsum(rng.standard_exponential((m, b)), axis=1) / rate
        hit = path == 0
        any_hit = hit.any(axis=1)
        first = hit.argmax(axis=1)
        rows = np.arange(m)
        t_hit = t[rows, first]
        if track_peak:
            cols = np.arange(b)[None, :]
            upto = np.where(any_hit[:, None], cols <= first[:, None], True)
            peaks[idx] = np.maximum(peaks[idx], np.where(upto, path, 0).max(axis=1))
        ok = any_hit & (t_hit <= cap)
        times[idx[ok]] = t_hit[ok]
        censored = np.where(any_hit, t_hit > cap, t[:, -1] > cap)
        keep = ~any_hit & ~censored
        idx = idx[keep]
        pos = path[keep, -1]
        clock = t[keep, -1]
    if track_peak:
        return times, peaks
    return times


def race(x_bid, y_ask, bid, ask, cap: float, rng):
    """Race two independent queues until one of them empties.

    ``bid`` and ``ask`` are ``(lam, mu)`` pairs.  Returns the depletion times
    (``inf`` if neither queue empties by ``cap``) and a boolean array that is
    True where the ask queue emptied first.  Only one queue moves per event,
    so the two queues never empty simultaneously.
    """
    xb = np.asarray(x_bid, dtype=np.int64).ravel()
    ya = np.asarray(y_ask, dtype=np.int64).ravel()
    if xb.shape != ya.shape:
        raise ValueError("bid and ask start arrays differ in shape")
    if np.any(xb < 1) or np.any(ya < 1):
        raise ValueError("queue sizes must be at least 1")
    n = xb.size
    times = np.full(n, np.inf)
    ask_first = np.zeros(n, dtype=bool)
    lam_b, mu_b = bid
    lam_a, mu_a = ask
    rate = lam_a + mu_a + lam_b + mu_b
    c1 = lam_a / rate
    c2 = (lam_a + mu_a) / rate
    c3 = (lam_a + mu_a + lam_b) / rate
    idx = np.arange(n)
    qa, qb = ya.copy(), xb.copy()
    clock = np.zeros(n)
    while idx.size:
        m = idx.size
        b = _block_len(2 * m)
        u = rng.random((m, b))
        da = np.where(u < c1, 1, np.where(u < c2, -1, 0)).astype(np.int64)
        db = np.where(u < c2, 0, np.where(u < c3, 1, -1)).astype(np.int64)
        pa = qa[:, None] + np.cumsum(da, axis=1)
        pb = qb[:, None] + np.cumsum(db, axis=1)
        t = clock[:, None] + np.cumsum(rng.standard_exponential((m, b)), axis=1) / rate
        hit = (pa == 0) | (pb == 0)
        any_hit = hit.any(axis=1)
        first = hit.argmax(axis=1)
        rows = np.arange(m)
        t_hit = t[rows, first]
        ok = any_hit & (t_hit <= cap)
        times[idx[ok]] = t_hit[ok]
        ask_first[idx[ok]] = pa[rows, first][ok] == 0
        censored = np.where(any_hit, t_hit > cap, t[:, -1] > cap)
        keep = ~any_hit & ~censored
        idx = idx[keep]
        qa = pa[keep, -1]
        qb = pb[keep, -1]
        clock = t[keep, -1]
    return times, ask_first
