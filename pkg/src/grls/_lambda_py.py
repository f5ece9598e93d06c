"""Multiplier search, NumPy fallback kernel.

Bracket the ball radius with doubling, then bisect on the chordal distance
d(lam) of the top-k eigenspace of the compressed block. Work is batched:
each refinement round evaluates a stack of interior multipliers with one
stacked eigh call and narrows the bracket by the chunk factor.

Shared contract with the compiled twin in _lambda_cy:

    lambda_search(A2, r, k, n, rho, lam_tol, lam_start, lam_cap)
        -> (lam, dist, status, nonmonotone)

    status 0: |d(lam) - rho| <= lam_tol
    status 1: bracket collapsed on a spectrum jump (degenerate crossing)
    status 2: bracket failure, d stays above rho up to lam_cap
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_CHUNK = 14
_WIDTH_REL = 1e-13


def _dist_batch(A2: np.ndarray, r: int, k: int, n: int, lams: np.ndarray) -> np.ndarray:
    """Chordal distances to the center for a batch of multipliers."""
    s = A2.shape[0]
    G = lams.size
    Bs = np.broadcast_to(A2, (G, s, s)).copy()
    if r:
        idx = np.arange(r)
        Bs[:, idx, idx] += lams[:, None]
    theta, W = np.linalg.eigh(Bs)
    ov = np.sum(W[:, :r, :] ** 2, axis=1) if r else np.zeros((G, s))
    m_center = k - r
    m_zero = n - k - (s - r)
    out = np.empty(G)
    for g in range(G):
        out[g] = _dist_one(theta[g], ov[g], float(lams[g]), m_center, m_zero, k)
    return out


def _dist_one(theta, ov, lam, m_center, m_zero, k) -> float:
    """Top-k overlap sum for one multiplier; theta ascending from eigh."""
    s = theta.shape[0]
    order = sorted(range(s), key=lambda i: (-theta[i], -ov[i]))
    sum_ov = 0.0
    remaining = k
    bp = 0
    c_left = m_center
    z_left = m_zero
    while remaining > 0:
        bh = (theta[order[bp]], ov[order[bp]]) if bp < s else None
        ch = (lam, 1.0) if c_left > 0 else None
        zh = (0.0, 0.0) if z_left > 0 else None
        best_key = zh
        kind = 2
        if bh is not None and (best_key is None or bh >= best_key):
            best_key, kind = bh, 0
        if ch is not None and (best_key is None or ch >= best_key):
            best_key, kind = ch, 1
        if kind == 0:
            sum_ov += ov[order[bp]]
            bp += 1
            remaining -= 1
        elif kind == 1:
            t = min(c_left, remaining)
            sum_ov += t
            c_left -= t
            remaining -= t
        else:
            t = min(z_left, remaining)
            z_left -= t
            remaining -= t
    return float(np.sqrt(max(0.0, k - sum_ov)))


def lambda_search(
    A2: np.ndarray,
    r: int,
    k: int,
    n: int,
    rho: float,
    lam_tol: float,
    lam_start: float,
    lam_cap: float,
):
    nonmonotone = False

    # phase 1: doubling until the distance drops to the radius
    lo, d_lo = 0.0, np.inf
    hi = None
    d_hi = 0.0
    lam = lam_start
    while True:
        lams = lam * (2.0 ** np.arange(8, dtype=float))
        ds = _dist_batch(A2, r, k, n, lams)
        if np.any(ds[:-1] < ds[1:] - 1e-12):
            nonmonotone = True
        j = int(np.argmax(ds <= rho)) if np.any(ds <= rho) else -1
        if j >= 0:
            if abs(ds[j] - rho) <= lam_tol:
                return float(lams[j]), float(ds[j]), 0, nonmonotone
            hi, d_hi = float(lams[j]), float(ds[j])
            if j > 0:
                lo, d_lo = float(lams[j - 1]), float(ds[j - 1])
            break
        lo, d_lo = float(lams[-1]), float(ds[-1])
        lam = float(lams[-1]) * 2.0
        if lam > lam_cap:
            if nonmonotone:
                res = _fallback_scan(A2, r, k, n, rho, lam_tol, lam_cap)
                if res is not None:
                    return res[0], res[1], res[2], True
            return lo, d_lo, 2, nonmonotone

    # phase 2: chunked bisection on [lo, hi]
    while True:
        if hi - lo <= _WIDTH_REL * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            d_mid = float(_dist_batch(A2, r, k, n, np.array([mid]))[0])
            return mid, d_mid, 1, nonmonotone
        lams = np.linspace(lo, hi, _CHUNK + 2)[1:-1]
        ds = _dist_batch(A2, r, k, n, lams)
        if np.any(ds[:-1] < ds[1:] - 1e-12):
            nonmonotone = True
        close = np.abs(ds - rho) <= lam_tol
        if np.any(close):
            j = int(np.argmin(np.where(close, np.abs(ds - rho), np.inf)))
            return float(lams[j]), float(ds[j]), 0, nonmonotone
        below = ds <= rho
        if np.any(below):
            j = int(np.argmax(below))
            hi, d_hi = float(lams[j]), float(ds[j])
            if j > 0:
                lo, d_lo = float(lams[j - 1]), float(ds[j - 1])
        else:
            lo, d_lo = float(lams[-1]), float(ds[-1])


def _fallback_scan(A2, r, k, n, rho, lam_tol, lam_cap):
    """Logarithmic 200-point scan for a first crossing, then local bisection.

    Used when the doubling phase saw non-monotone distances and failed to
    bracket; returns None when no crossing exists up to lam_cap.
    """
    lams = np.logspace(-12, np.log10(lam_cap), 200)
    ds = _dist_batch(A2, r, k, n, lams)
    below = ds <= rho
    if not np.any(below):
        return None
    j = int(np.argmax(below))
    lo = 0.0 if j == 0 else float(lams[j - 1])
    hi = float(lams[j])
    d_hi = float(ds[j])
    if abs(d_hi - rho) <= lam_tol:
        return hi, d_hi, 0
    while hi - lo > _WIDTH_REL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        d_mid = float(_dist_batch(A2, r, k, n, np.array([mid]))[0])
        if abs(d_mid - rho) <= lam_tol:
            return mid, d_mid, 0
        if d_mid > rho:
            lo = mid
        else:
            hi, d_hi = mid, d_mid
    mid = 0.5 * (lo + hi)
    d_mid = float(_dist_batch(A2, r, k, n, np.array([mid]))[0])
    return mid, d_mid, 1
