"""Pure-numpy implementations of the hot numerical kernels.

These are the reference semantics for the compiled extension in
``_core.pyx``; the two backends must agree bit-for-bit up to floating
round-off (see tests/test_kernels.py).  Everything here is vectorized so
the fallback stays usable for the full coverage enumerations, just
slower than the compiled path.
"""

from __future__ import annotations

import numpy as np

P1_CLIP = 1e-9  # shrink of the feasible p1 range away from the singular ends
INVERT_ITERS = 80  # bisection steps; 2^-80 of the unit interval << 1e-12
ZGRID_DEFAULT = 2048


def _expit(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def invert_p1_batch(theta, tnuis, n1, n2):
    """Solve n1*p1 + n2*expit(logit(p1) - theta) = tnuis for p1, elementwise.

    ``theta`` and ``tnuis`` broadcast against each other.  The map is
    strictly increasing in p1 on the feasible range
    (max(0, (tnuis - n2)/n1), min(1, tnuis/n1)), so plain bisection is
    reliable.  Entries with tnuis outside (0, n1+n2) come back as NaN.
    """
    theta = np.asarray(theta, dtype=float)
    tnuis = np.asarray(tnuis, dtype=float)
    theta, tnuis = np.broadcast_arrays(theta, tnuis)
    lo = np.maximum(P1_CLIP, (tnuis - n2) / n1 + P1_CLIP)
    hi = np.minimum(1.0 - P1_CLIP, tnuis / n1 - P1_CLIP)
    bad = ~((tnuis > 0.0) & (tnuis < n1 + n2) & (lo < hi))
    lo = np.where(bad, 0.25, lo)
    hi = np.where(bad, 0.75, hi)

    def f(p1):
        return n1 * p1 + n2 * _expit(np.log(p1 / (1.0 - p1)) - theta) - tnuis

    a, b = lo.copy(), hi.copy()
    for _ in range(INVERT_ITERS):
        mid = 0.5 * (a + b)
        low = f(mid) < 0.0
        a = np.where(low, mid, a)
        b = np.where(low, b, mid)
    out = 0.5 * (a + b)
    return np.where(bad, np.nan, out)


def sbar_profiled_batch(x1, x2, n1, n2, p1, p2):
    """Standardized two-binomial interest score at (p1, p2), elementwise.

    Formula: [1/(n1 p1 q1) + 1/(n2 p2 q2)]^(-1/2)
             * [(x1/n1 - p1)/(p1 q1) - (x2/n2 - p2)/(p2 q2)],
    the difference reflecting that the interest parameter is the
    difference of the two logits.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    a1 = p1 * (1.0 - p1)
    a2 = p2 * (1.0 - p2)
    pref = 1.0 / np.sqrt(1.0 / (n1 * a1) + 1.0 / (n2 * a2))
    return pref * ((x1 / n1 - p1) / a1 - (x2 / n2 - p2) / a2)


def zinterval_p1_batch(x1, x2, n1, n2, tnuis, z, ngrid=ZGRID_DEFAULT):
    """Solve sbar^2 <= z^2 in p1 at fixed nuisance value, per data row.

    For each (x1[i], x2[i], tnuis[i]): scan ``ngrid`` points of the
    feasible p1 range, locate the solution component containing the
    point where sbar is closest to zero, and refine both edges by
    bisection.  Returns (p1_lo, p1_hi, at_lo, at_hi, ok) where the
    ``at_*`` flags mark components that run into the clipped range ends
    (half-infinite in theta) and ``ok`` is False for degenerate rows
    (tnuis at 0 or n1+n2: no feasible p1 at all).
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    tnuis = np.atleast_1d(np.asarray(tnuis, dtype=float))
    m = x1.shape[0]
    lo = np.maximum(P1_CLIP, (tnuis - n2) / n1 + P1_CLIP)
    hi = np.minimum(1.0 - P1_CLIP, tnuis / n1 - P1_CLIP)
    ok = (tnuis > 0.0) & (tnuis < n1 + n2) & (lo < hi)

    p1_lo = np.full(m, np.nan)
    p1_hi = np.full(m, np.nan)
    at_lo = np.zeros(m, dtype=bool)
    at_hi = np.zeros(m, dtype=bool)

    t = np.linspace(0.0, 1.0, ngrid)
    safe_lo = np.where(ok, lo, 0.25)
    safe_hi = np.where(ok, hi, 0.75)
    grid = safe_lo[:, None] + (safe_hi - safe_lo)[:, None] * t[None, :]
    p2g = (tnuis[:, None] - n1 * grid) / n2
    sb = sbar_profiled_batch(x1[:, None], x2[:, None], n1, n2, grid, p2g)
    fg = sb * sb - z * z

    anchor = np.argmin(np.abs(sb), axis=1)

    inside = fg <= 0.0
    for i in range(m):
        if not ok[i]:
            continue
        j = anchor[i]
        if not inside[i, j]:
            if not np.any(inside[i]):
                # sbar^2 > z^2 on the whole scan: report the full feasible
                # range, flagged at both ends
                p1_lo[i], p1_hi[i] = grid[i, 0], grid[i, ngrid - 1]
                at_lo[i] = at_hi[i] = True
                continue
            j = int(np.argmax(inside[i]))
        jl = j
        while jl > 0 and inside[i, jl - 1]:
            jl -= 1
        jr = j
        while jr < ngrid - 1 and inside[i, jr + 1]:
            jr += 1
        if jl == 0:
            p1_lo[i] = grid[i, 0]
            at_lo[i] = True
        else:
            p1_lo[i] = _bisect_edge(x1[i], x2[i], n1, n2, tnuis[i], z,
                                    grid[i, jl - 1], grid[i, jl])
        if jr == ngrid - 1:
            p1_hi[i] = grid[i, ngrid - 1]
            at_hi[i] = True
        else:
            p1_hi[i] = _bisect_edge(x1[i], x2[i], n1, n2, tnuis[i], z,
                                    grid[i, jr + 1], grid[i, jr])
    return p1_lo, p1_hi, at_lo, at_hi, ok


def _bisect_edge(x1, x2, n1, n2, tnuis, z, outside, inside):
    """Refine a component edge; ``inside`` satisfies sbar^2 <= z^2."""
    a, b = outside, inside
    for _ in range(60):
        mid = 0.5 * (a + b)
        p2 = (tnuis - n1 * mid) / n2
        s = sbar_profiled_batch(x1, x2, n1, n2, mid, p2)
        if s * s - z * z <= 0.0:
            b = mid
        else:
            a = mid
    return b


def t3_mle_batch(samples):
    """Location MLE of the unit-scale t3 family, one root per sample row.

    Safeguarded Newton on psi(a) = sum 4(x-a)/(3+(x-a)^2) starting from
    the row median, with a bracket kept on [min(x)-1, max(x)+1] where a
    sign change is guaranteed.  Returns (roots, converged).
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    m = x.shape[0]
    a = np.median(x, axis=1)
    lo = x.min(axis=1) - 1.0
    hi = x.max(axis=1) + 1.0
    active = np.ones(m, dtype=bool)
    for _ in range(200):
        d = x - a[:, None]
        den = 3.0 + d * d
        psi = np.sum(4.0 * d / den, axis=1)
        dpsi = np.sum(4.0 * (d * d - 3.0) / (den * den), axis=1)
        conv = np.abs(psi) < 1e-10
        active &= ~conv
        if not np.any(active):
            break
        # shrink bracket: psi decreasing through the root
        pos = psi > 0.0
        lo = np.where(active & pos, a, lo)
        hi = np.where(active & ~pos, a, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dpsi < 0.0, -psi / dpsi, np.nan)
        cand = a + step
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        a = np.where(active, cand, a)
    d = x - a[:, None]
    psi = np.sum(4.0 * d / (3.0 + d * d), axis=1)
    return a, np.abs(psi) < 1e-8
