"""Fixed, versioned test-function families for weak-form residuals.

Members are tensor products of a polynomial time window vanishing at
the horizon, a product of 1D smooth bumps in position, and a low-degree
polynomial in velocity.  Every derivative used by the residuals is
hard-coded; nothing is differentiated numerically.

The family shape is fixed ("v1"); only the spatial window is scaled to
the run's support box so the bumps actually see the data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

BANK_VERSION = "v1"


# time windows on [0, T], vanishing at t = T
def _window_linear(T):
    return (lambda t: 1.0 - t / T), (lambda t: -1.0 / T)


def _window_quadratic(T):
    return (lambda t: (1.0 - t / T) ** 2), (lambda t: -2.0 * (1.0 - t / T) / T)


def _bump_1d(c: float, w: float):
    """C-infinity bump on (c-w, c+w), value 1 at the center.

    B(s) = exp(1 - 1/(1-u^2)), u = (s-c)/w;  B'(s) = B(s) * (-2u/w)/(1-u^2)^2.
    """

    def val(s):
        u = (np.asarray(s) - c) / w
        out = np.zeros_like(u, dtype=np.float64)
        inside = np.abs(u) < 1.0
        q = 1.0 - u[inside] ** 2
        out[inside] = np.exp(1.0 - 1.0 / q)
        return out

    def der(s):
        u = (np.asarray(s) - c) / w
        out = np.zeros_like(u, dtype=np.float64)
        inside = np.abs(u) < 1.0
        q = 1.0 - u[inside] ** 2
        out[inside] = np.exp(1.0 - 1.0 / q) * (-2.0 * u[inside] / w) / (q * q)
        return out

    return val, der


class SpatialBump:
    """Product of per-axis bumps centered on the support box."""

    def __init__(self, center, half_width):
        self.center = np.asarray(center, dtype=np.float64)
        self.half_width = np.asarray(half_width, dtype=np.float64)
        self._parts = [_bump_1d(c, w) for c, w in zip(self.center, self.half_width)]

    def value(self, X):
        out = np.ones(X.shape[0])
        for a, (val, _) in enumerate(self._parts):
            out *= val(X[:, a])
        return out

    def grad(self, X):
        vals = np.stack([val(X[:, a]) for a, (val, _) in enumerate(self._parts)], axis=1)
        ders = np.stack([der(X[:, a]) for a, (_, der) in enumerate(self._parts)], axis=1)
        out = np.empty_like(vals)
        for a in range(vals.shape[1]):
            rest = np.ones(X.shape[0])
            for b in range(vals.shape[1]):
                if b != a:
                    rest *= vals[:, b]
            out[:, a] = ders[:, a] * rest
        return out


class _One:
    @staticmethod
    def value(X):
        return np.ones(X.shape[0])

    @staticmethod
    def grad(X):
        return np.zeros_like(X)


@dataclass
class KineticTest:
    """phi(t, x, v) = window(t) * g(x) * q(v) with closed-form parts."""

    name: str
    window: Callable
    window_dt: Callable
    g: object  # value/grad over positions
    q_value: Callable  # (N, d) velocities -> (N,)
    q_grad: Callable  # (N, d) velocities -> (N, d)

    def value(self, t, X, V):
        return self.window(t) * self.g.value(X) * self.q_value(V)

    def dt(self, t, X, V):
        return self.window_dt(t) * self.g.value(X) * self.q_value(V)

    def grad_x(self, t, X, V):
        return (self.window(t) * self.q_value(V))[:, None] * self.g.grad(X)

    def grad_v(self, t, X, V):
        return (self.window(t) * self.g.value(X))[:, None] * self.q_grad(V)


@dataclass
class ScalarTest:
    """phi(t, x) = window(t) * g(x)."""

    name: str
    window: Callable
    window_dt: Callable
    g: object

    def value(self, t, X):
        return self.window(t) * self.g.value(X)

    def dt(self, t, X):
        return self.window_dt(t) * self.g.value(X)

    def grad_x(self, t, X):
        return self.window(t) * self.g.grad(X)


@dataclass
class VectorTest:
    """phi_d(t, x) = e_axis * window(t) * g(x); jac[n, a, b] = d phi_a / d x_b."""

    name: str
    axis: int
    window: Callable
    window_dt: Callable
    g: object

    def value(self, t, X):
        out = np.zeros_like(X)
        out[:, self.axis] = self.window(t) * self.g.value(X)
        return out

    def dt(self, t, X):
        out = np.zeros_like(X)
        out[:, self.axis] = self.window_dt(t) * self.g.value(X)
        return out

    def jac(self, t, X):
        n, d = X.shape
        out = np.zeros((n, d, d))
        out[:, self.axis, :] = self.window(t) * self.g.grad(X)
        return out


def _poly_one(V):
    return np.ones(V.shape[0])


def _poly_one_grad(V):
    return np.zeros_like(V)


def _poly_component(axis):
    def val(V):
        return V[:, axis].copy()

    def grad(V):
        out = np.zeros_like(V)
        out[:, axis] = 1.0
        return out

    return val, grad


def _poly_speed2(V):
    return np.einsum("ij,ij->i", V, V)


def _poly_speed2_grad(V):
    return 2.0 * V


def support_box(states, margin: float = 1.5):
    """(center, half_width) covering the sampled positions, inflated."""
    lo = np.min([s.x.min(axis=0) for s in states], axis=0)
    hi = np.max([s.x.max(axis=0) for s in states], axis=0)
    center = 0.5 * (lo + hi)
    half = np.maximum(0.5 * (hi - lo) * margin, 1e-6)
    return center, half


def kinetic_bank(T: float, center, half_width) -> list[KineticTest]:
    """The fixed v1 family of phase-space test functions."""
    lin, lin_dt = _window_linear(T)
    quad, quad_dt = _window_quadratic(T)
    bump = SpatialBump(center, half_width)
    d = len(np.atleast_1d(center))
    bank = [
        KineticTest("mass_linwin", lin, lin_dt, _One, _poly_one, _poly_one_grad),
        KineticTest("energy_quadwin", quad, quad_dt, _One, _poly_speed2, _poly_speed2_grad),
        KineticTest("bump_mass", quad, quad_dt, bump, _poly_one, _poly_one_grad),
        KineticTest("bump_energy", lin, lin_dt, bump, _poly_speed2, _poly_speed2_grad),
    ]
    for axis in range(d):
        val, grad = _poly_component(axis)
        bank.append(KineticTest(f"momentum{axis}_quadwin", quad, quad_dt, _One, val, grad))
        val2, grad2 = _poly_component(axis)
        bank.append(KineticTest(f"bump_momentum{axis}", quad, quad_dt, bump, val2, grad2))
    return bank


def macro_banks(T: float, center, half_width):
    """Scalar and vector banks for the macroscopic residuals."""
    lin, lin_dt = _window_linear(T)
    quad, quad_dt = _window_quadratic(T)
    bump = SpatialBump(center, half_width)
    d = len(np.atleast_1d(center))
    scalars = [
        ScalarTest("mass_linwin", lin, lin_dt, _One),
        ScalarTest("bump_quadwin", quad, quad_dt, bump),
    ]
    vectors = []
    for axis in range(d):
        vectors.append(VectorTest(f"const{axis}_quadwin", axis, quad, quad_dt, _One))
        vectors.append(VectorTest(f"bump{axis}_quadwin", axis, quad, quad_dt, bump))
    return scalars, vectors
