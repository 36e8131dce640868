# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise kernels.

Twin of ``_kernels``: same reduction order (ordered pairs i < j,
antisymmetric accumulation), same zero-relative-velocity convention.
"""

from libc.math cimport sqrt, pow, INFINITY


cdef inline double _xpow(double base, double e) noexcept nogil:
    # exact fast paths for the exponents that dominate production runs
    if e == 0.0:
        return 1.0
    if e == 1.0:
        return base
    if e == 2.0:
        return base * base
    if e == 3.0:
        return base * base * base
    if e == 0.5:
        return sqrt(base)
    return pow(base, e)


def force_pair_sum(double[:, ::1] x, double[:, ::1] v,
                   double alpha, double p, double reg2,
                   double[:, ::1] acc):
    """Accumulate sum_{j != i} |dv|**(p-2) dv / r**alpha into ``acc``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double r2, m2, r, m, coef, c, dxk
    cdef double e = p - 1.0
    cdef int status = 0
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                r2 = 0.0
                m2 = 0.0
                for k in range(d):
                    dxk = x[j, k] - x[i, k]
                    r2 += dxk * dxk
                    dxk = v[j, k] - v[i, k]
                    m2 += dxk * dxk
                if r2 == 0.0 and reg2 == 0.0:
                    status = 1
                    continue
                if m2 == 0.0:
                    continue
                r = sqrt(r2 + reg2)
                m = sqrt(m2)
                coef = _xpow(m, e) / _xpow(r, alpha) / m
                for k in range(d):
                    c = coef * (v[j, k] - v[i, k])
                    acc[i, k] += c
                    acc[j, k] -= c
    return status


def dissipation_sum(double[:, ::1] x, double[:, ::1] v,
                    double alpha, double expo, double reg2):
    """Sum over ordered pairs i != j of |dv|**expo / r**alpha."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double r2, m2, dk, total = 0.0
    cdef int status = 0
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                r2 = 0.0
                m2 = 0.0
                for k in range(d):
                    dk = x[j, k] - x[i, k]
                    r2 += dk * dk
                    dk = v[j, k] - v[i, k]
                    m2 += dk * dk
                if r2 == 0.0 and reg2 == 0.0:
                    status = 1
                    continue
                if m2 == 0.0:
                    continue
                total += 2.0 * _xpow(sqrt(m2), expo) / _xpow(sqrt(r2 + reg2), alpha)
    return total, status


def pair_stats(double[:, ::1] x, double[:, ::1] v):
    """Return (min pair distance, min over pairs of r / (2 |dv| + tiny))."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double r2, m2, dk, r, t
    cdef double dmin = INFINITY
    cdef double tpair = INFINITY
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                r2 = 0.0
                m2 = 0.0
                for k in range(d):
                    dk = x[j, k] - x[i, k]
                    r2 += dk * dk
                    dk = v[j, k] - v[i, k]
                    m2 += dk * dk
                r = sqrt(r2)
                if r < dmin:
                    dmin = r
                t = r / (2.0 * sqrt(m2) + 1e-300)
                if t < tpair:
                    tpair = t
    return dmin, tpair
