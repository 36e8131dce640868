"""Pure-numpy pairwise kernels (fallback for the compiled core).

All loops run over ordered rows i with vectorized tails j > i, so the
reduction order is fixed and results are deterministic.  Pair (i, j)
contributions are accumulated antisymmetrically: the same floating-point
number is added to row i and subtracted from row j.

Semantics shared with ``_speedups``:

* ``m = |v_j - v_i|`` equal to zero annihilates the pair contribution
  (continuous extension of ``m**(p-2) * dv``, required for p < 2);
* distances use ``r = sqrt(|dx|^2 + reg2)``; with ``reg2 == 0`` an exact
  zero distance is a collision, reported through the returned status.
"""

import numpy as np

STATUS_OK = 0
STATUS_COLLISION = 1

_TINY = 1e-300


def force_pair_sum(x, v, alpha, p, reg2):
    """Raw alignment force sum (no 1/N factor).

    Returns ``(acc, status)`` where ``acc[i] = sum_{j != i}
    |dv|**(p-2) dv / r**alpha`` and status flags exact collisions.
    """
    n = x.shape[0]
    acc = np.zeros_like(x)
    status = STATUS_OK
    for i in range(n - 1):
        dx = x[i + 1:] - x[i]
        r2 = np.einsum("ij,ij->i", dx, dx)
        if reg2 == 0.0 and np.any(r2 == 0.0):
            status = STATUS_COLLISION
        r = np.sqrt(r2 + reg2)
        dv = v[i + 1:] - v[i]
        m = np.sqrt(np.einsum("ij,ij->i", dv, dv))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            coef = np.where(m > 0.0, m ** (p - 1.0) / r**alpha, 0.0)
            unit = np.where(m[:, None] > 0.0, dv / np.maximum(m, _TINY)[:, None], 0.0)
        contrib = unit * coef[:, None]
        acc[i] += contrib.sum(axis=0)
        acc[i + 1:] -= contrib
    return acc, status


def dissipation_sum(x, v, alpha, expo, reg2):
    """Sum over ordered pairs i != j of |dv|**expo / r**alpha."""
    n = x.shape[0]
    total = 0.0
    status = STATUS_OK
    for i in range(n - 1):
        dx = x[i + 1:] - x[i]
        r2 = np.einsum("ij,ij->i", dx, dx)
        if reg2 == 0.0 and np.any(r2 == 0.0):
            status = STATUS_COLLISION
        r = np.sqrt(r2 + reg2)
        dv = v[i + 1:] - v[i]
        m = np.sqrt(np.einsum("ij,ij->i", dv, dv))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            term = np.where(m > 0.0, m**expo / r**alpha, 0.0)
        total += 2.0 * float(term.sum())
    return total, status


def pair_stats(x, v):
    """Min pairwise distance and min over pairs of r / (2 |dv| + tiny).

    The second value bounds the time for any pair gap to halve; the
    stepper uses it as the proximity clamp.
    """
    n = x.shape[0]
    dmin = np.inf
    tpair = np.inf
    for i in range(n - 1):
        dx = x[i + 1:] - x[i]
        r = np.sqrt(np.einsum("ij,ij->i", dx, dx))
        dv = v[i + 1:] - v[i]
        m = np.sqrt(np.einsum("ij,ij->i", dv, dv))
        dmin = min(dmin, float(r.min()))
        tpair = min(tpair, float((r / (2.0 * m + _TINY)).min()))
    return dmin, tpair
