# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot numerical kernels.

Same API and semantics as ``fallback.py``; scalar inner loops instead of
vectorized array sweeps.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, log, sqrt, tanh, NAN

cnp.import_array()

cdef double P1_CLIP = 1e-9
cdef int INVERT_ITERS = 80
cdef int ZGRID_DEFAULT = 2048


cdef inline double _expit(double x) nogil:
    return 0.5 * (1.0 + tanh(0.5 * x))


cdef inline double _nuis_gap(double p1, double theta, double n1, double n2,
                             double tnuis) nogil:
    return n1 * p1 + n2 * _expit(log(p1 / (1.0 - p1)) - theta) - tnuis


cdef inline double _invert_p1(double theta, double tnuis, double n1,
                              double n2) nogil:
    cdef double lo, hi, mid
    cdef int it
    lo = (tnuis - n2) / n1 + P1_CLIP
    if lo < P1_CLIP:
        lo = P1_CLIP
    hi = tnuis / n1 - P1_CLIP
    if hi > 1.0 - P1_CLIP:
        hi = 1.0 - P1_CLIP
    if not (tnuis > 0.0 and tnuis < n1 + n2 and lo < hi):
        return NAN
    for it in range(INVERT_ITERS):
        mid = 0.5 * (lo + hi)
        if _nuis_gap(mid, theta, n1, n2, tnuis) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


cdef inline double _sbar(double x1, double x2, double n1, double n2,
                         double p1, double p2) nogil:
    cdef double a1 = p1 * (1.0 - p1)
    cdef double a2 = p2 * (1.0 - p2)
    cdef double pref = 1.0 / sqrt(1.0 / (n1 * a1) + 1.0 / (n2 * a2))
    return pref * ((x1 / n1 - p1) / a1 - (x2 / n2 - p2) / a2)


def invert_p1_batch(theta, tnuis, double n1, double n2):
    cdef cnp.ndarray[double, ndim=1] th = np.ascontiguousarray(
        np.broadcast_arrays(np.asarray(theta, dtype=float),
                            np.asarray(tnuis, dtype=float))[0].ravel())
    cdef cnp.ndarray[double, ndim=1] tn = np.ascontiguousarray(
        np.broadcast_arrays(np.asarray(theta, dtype=float),
                            np.asarray(tnuis, dtype=float))[1].ravel())
    shape = np.broadcast_shapes(np.shape(theta), np.shape(tnuis))
    cdef Py_ssize_t m = th.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(m, dtype=float)
    cdef Py_ssize_t i
    for i in range(m):
        out[i] = _invert_p1(th[i], tn[i], n1, n2)
    return out.reshape(shape)


def sbar_profiled_batch(x1, x2, double n1, double n2, p1, p2):
    arrs = np.broadcast_arrays(np.asarray(x1, dtype=float),
                               np.asarray(x2, dtype=float),
                               np.asarray(p1, dtype=float),
                               np.asarray(p2, dtype=float))
    shape = arrs[0].shape
    cdef cnp.ndarray[double, ndim=1] a = np.ascontiguousarray(arrs[0].ravel())
    cdef cnp.ndarray[double, ndim=1] b = np.ascontiguousarray(arrs[1].ravel())
    cdef cnp.ndarray[double, ndim=1] c = np.ascontiguousarray(arrs[2].ravel())
    cdef cnp.ndarray[double, ndim=1] d = np.ascontiguousarray(arrs[3].ravel())
    cdef Py_ssize_t m = a.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(m, dtype=float)
    cdef Py_ssize_t i
    for i in range(m):
        out[i] = _sbar(a[i], b[i], n1, n2, c[i], d[i])
    return out.reshape(shape)


cdef inline double _edge(double x1, double x2, double n1, double n2,
                         double tnuis, double z, double outside,
                         double inside) nogil:
    cdef double a = outside, b = inside, mid, p2, s
    cdef int it
    for it in range(60):
        mid = 0.5 * (a + b)
        p2 = (tnuis - n1 * mid) / n2
        s = _sbar(x1, x2, n1, n2, mid, p2)
        if s * s - z * z <= 0.0:
            b = mid
        else:
            a = mid
    return b


def zinterval_p1_batch(x1, x2, double n1, double n2, tnuis, double z,
                       int ngrid=ZGRID_DEFAULT):
    cdef cnp.ndarray[double, ndim=1] ax1 = np.ascontiguousarray(
        np.atleast_1d(np.asarray(x1, dtype=float)))
    cdef cnp.ndarray[double, ndim=1] ax2 = np.ascontiguousarray(
        np.atleast_1d(np.asarray(x2, dtype=float)))
    cdef cnp.ndarray[double, ndim=1] atn = np.ascontiguousarray(
        np.atleast_1d(np.asarray(tnuis, dtype=float)))
    cdef Py_ssize_t m = ax1.shape[0]
    cdef cnp.ndarray[double, ndim=1] p1_lo = np.full(m, np.nan)
    cdef cnp.ndarray[double, ndim=1] p1_hi = np.full(m, np.nan)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] at_lo = np.zeros(m, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] at_hi = np.zeros(m, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] ok = np.zeros(m, dtype=np.uint8)
    cdef cnp.ndarray[double, ndim=1] sb = np.empty(ngrid, dtype=float)
    cdef Py_ssize_t i, j, jl, jr, anchor
    cdef double lo, hi, step, g, p2, best, T
    for i in range(m):
        T = atn[i]
        lo = (T - n2) / n1 + P1_CLIP
        if lo < P1_CLIP:
            lo = P1_CLIP
        hi = T / n1 - P1_CLIP
        if hi > 1.0 - P1_CLIP:
            hi = 1.0 - P1_CLIP
        if not (T > 0.0 and T < n1 + n2 and lo < hi):
            continue
        ok[i] = 1
        step = (hi - lo) / (ngrid - 1)
        anchor = 0
        best = 1e300
        for j in range(ngrid):
            g = lo + step * j
            p2 = (T - n1 * g) / n2
            sb[j] = _sbar(ax1[i], ax2[i], n1, n2, g, p2)
            if fabs(sb[j]) < best:
                best = fabs(sb[j])
                anchor = j
        j = anchor
        if sb[j] * sb[j] - z * z > 0.0:
            j = -1
            for jl in range(ngrid):
                if sb[jl] * sb[jl] - z * z <= 0.0:
                    j = jl
                    break
            if j < 0:
                p1_lo[i] = lo
                p1_hi[i] = hi
                at_lo[i] = 1
                at_hi[i] = 1
                continue
        jl = j
        while jl > 0 and sb[jl - 1] * sb[jl - 1] - z * z <= 0.0:
            jl -= 1
        jr = j
        while jr < ngrid - 1 and sb[jr + 1] * sb[jr + 1] - z * z <= 0.0:
            jr += 1
        if jl == 0:
            p1_lo[i] = lo
            at_lo[i] = 1
        else:
            p1_lo[i] = _edge(ax1[i], ax2[i], n1, n2, T, z,
                             lo + step * (jl - 1), lo + step * jl)
        if jr == ngrid - 1:
            p1_hi[i] = hi
            at_hi[i] = 1
        else:
            p1_hi[i] = _edge(ax1[i], ax2[i], n1, n2, T, z,
                             lo + step * (jr + 1), lo + step * jr)
    return (p1_lo, p1_hi, at_lo.astype(bool), at_hi.astype(bool),
            ok.astype(bool))


def t3_mle_batch(samples):
    cdef cnp.ndarray[double, ndim=2] x = np.ascontiguousarray(
        np.atleast_2d(np.asarray(samples, dtype=float)))
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef cnp.ndarray[double, ndim=1] med = np.median(x, axis=1)
    cdef cnp.ndarray[double, ndim=1] roots = np.empty(m, dtype=float)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] conv = np.zeros(m, dtype=np.uint8)
    cdef Py_ssize_t i, j, it
    cdef double a, lo, hi, psi, dpsi, d, den, cand
    for i in range(m):
        a = med[i]
        lo = x[i, 0]
        hi = x[i, 0]
        for j in range(1, n):
            if x[i, j] < lo:
                lo = x[i, j]
            if x[i, j] > hi:
                hi = x[i, j]
        lo -= 1.0
        hi += 1.0
        for it in range(200):
            psi = 0.0
            dpsi = 0.0
            for j in range(n):
                d = x[i, j] - a
                den = 3.0 + d * d
                psi += 4.0 * d / den
                dpsi += 4.0 * (d * d - 3.0) / (den * den)
            if fabs(psi) < 1e-10:
                conv[i] = 1
                break
            if psi > 0.0:
                lo = a
            else:
                hi = a
            if dpsi < 0.0:
                cand = a - psi / dpsi
            else:
                cand = 0.5 * (lo + hi)
            if cand <= lo or cand >= hi:
                cand = 0.5 * (lo + hi)
            a = cand
        roots[i] = a
        if not conv[i]:
            psi = 0.0
            for j in range(n):
                d = x[i, j] - a
                psi += 4.0 * d / (3.0 + d * d)
            if fabs(psi) < 1e-8:
                conv[i] = 1
    return roots, conv.astype(bool)
