# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Wigner-d recurrence used for every harmonic table in the package."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, log, exp, lgamma, fabs

cnp.import_array()


cdef void _seed(int two_j, int two_m, int two_mp, double *sign, double *logc,
                double *pc, double *ps) noexcept nogil:
    cdef double j = two_j / 2.0
    cdef double m = two_m / 2.0
    cdef int tmp
    cdef bint swapped = 0
    if abs(two_mp) < abs(two_m):
        swapped = 1
        tmp = two_m
        two_m = two_mp
        two_mp = tmp
        m = two_m / 2.0
    logc[0] = 0.5 * (lgamma(2 * j + 1) - lgamma(j + m + 1) - lgamma(j - m + 1))
    if two_mp > 0 or (two_mp == 0 and two_m == 0):
        sign[0] = 1.0
        pc[0] = j + m
        ps[0] = j - m
    else:
        sign[0] = -1.0 if ((two_m + two_j) // 2) % 2 else 1.0
        pc[0] = j - m
        ps[0] = j + m
    if swapped and ((two_mp - two_m) // 2) % 2:
        sign[0] = -sign[0]


def wigner_d_rows(int two_m, int two_mp, int two_jmax, beta):
    """Rows ``d^j_{m,m'}(beta)`` for ``j = max(|m|,|m'|) .. jmax`` (labels doubled)."""
    if (two_m - two_mp) % 2:
        raise ValueError(f"labels 2m={two_m}, 2m'={two_mp} mix integer and half-integer spin")
    cdef cnp.ndarray[double, ndim=1] b = np.ascontiguousarray(beta, dtype=np.float64)
    cdef Py_ssize_t nb = b.shape[0]
    cdef int two_j0 = max(abs(two_m), abs(two_mp))
    cdef Py_ssize_t n_j = (two_jmax - two_j0) // 2 + 1
    if n_j <= 0:
        return np.zeros((0, nb))
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((n_j, nb))
    cdef double sign, logc, pc, ps
    _seed(two_j0, two_m, two_mp, &sign, &logc, &pc, &ps)
    cdef double m = two_m / 2.0
    cdef double mp = two_mp / 2.0
    cdef double j, jp, denom, a, shift, bcoef, hc, hs, lv, cb, prev, cur, nxt
    cdef Py_ssize_t i, q
    cdef double[:, ::1] o = out
    cdef double[::1] bv = b
    # recurrence coefficients depend on j only
    cdef cnp.ndarray[double, ndim=1] ca = np.empty(n_j)
    cdef cnp.ndarray[double, ndim=1] cs = np.empty(n_j)
    cdef cnp.ndarray[double, ndim=1] cbb = np.empty(n_j)
    j = two_j0 / 2.0
    for i in range(1, n_j):
        jp = j + 1.0
        denom = sqrt((jp * jp - m * m) * (jp * jp - mp * mp))
        ca[i] = jp * (2.0 * j + 1.0) / denom
        if j > 0:
            cs[i] = m * mp / (j * jp)
            cbb[i] = jp * sqrt((j * j - m * m) * (j * j - mp * mp)) / (j * denom)
        else:
            cs[i] = 0.0
            cbb[i] = 0.0
        j = jp
    cdef double[::1] cav = ca
    cdef double[::1] csv = cs
    cdef double[::1] cbv = cbb
    with nogil:
        for q in range(nb):
            hc = fabs(cos(0.5 * bv[q]))
            hs = fabs(sin(0.5 * bv[q]))
            lv = logc
            if pc > 0:
                lv = lv + (pc * log(hc) if hc > 0 else -1e300)
            if ps > 0:
                lv = lv + (ps * log(hs) if hs > 0 else -1e300)
            cur = sign * exp(lv) if lv > -700.0 else 0.0
            o[0, q] = cur
            prev = 0.0
            cb = cos(bv[q])
            for i in range(1, n_j):
                nxt = cav[i] * (cb - csv[i]) * cur - cbv[i] * prev
                o[i, q] = nxt
                prev = cur
                cur = nxt
    return out
