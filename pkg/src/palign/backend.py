"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback
is semantically identical (same pair order, same accumulation scheme).
Set ``PALIGN_FORCE_PYTHON=1`` to force the fallback, e.g. for the
kernel benchmark.  ``PALIGN_DETERMINISTIC=1`` is honored trivially:
both backends reduce over the ordered pair list (i < j) in a fixed
sequential order, so results are reproducible bit-for-bit for a given
backend on a given platform.
"""

import os

import numpy as np

from . import _kernels as _py

_FORCE_PY = os.environ.get("PALIGN_FORCE_PYTHON", "") not in ("", "0")

_impl = None
if not _FORCE_PY:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = None

BACKEND = "compiled" if _impl is not None else "python"

STATUS_OK = _py.STATUS_OK
STATUS_COLLISION = _py.STATUS_COLLISION


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def force_pair_sum(x, v, alpha, p, reg2):
    """Raw pair force sum (no 1/N); returns (acc, status)."""
    if _impl is None:
        return _py.force_pair_sum(_c(x), _c(v), alpha, p, reg2)
    acc = np.zeros_like(x, dtype=np.float64, order="C")
    status = _impl.force_pair_sum(_c(x), _c(v), alpha, p, reg2, acc)
    return acc, status


def dissipation_sum(x, v, alpha, expo, reg2=0.0):
    """Ordered-pair sum of |dv|**expo / r**alpha; returns (value, status)."""
    if _impl is None:
        return _py.dissipation_sum(_c(x), _c(v), alpha, expo, reg2)
    return _impl.dissipation_sum(_c(x), _c(v), alpha, expo, reg2)


def pair_stats(x, v):
    """(min pair distance, proximity time scale) of a state."""
    if _impl is None:
        return _py.pair_stats(_c(x), _c(v))
    return _impl.pair_stats(_c(x), _c(v))
