"""Independent ground truth for verification.

The two-particle system on a line reduces to the scalar ODE for the
separation r = x_2 - x_1:

    r'' = -r' |r'|^(p-2) |r|^(-alpha),

a pure friction law on the relative velocity.  For p > alpha + 2 and
matched initial data the first integral separates and yields a closed
collision time; this module derives it, provides the alpha = 1 finite
collision bound, and cross-validates everything by direct integration
with its own adaptive step-doubling RK4 (a code path deliberately
disjoint from the production Dormand-Prince stepper).

Closed form used here (alpha > 1, p > alpha + 2, matched data c = 0):

    -r' = K r^beta,  K = ((p-3)/(alpha-1))^(1/(3-p)),
                     beta = (alpha-1)/(p-3) < 1,
    t_c  = r0^(1-beta) / ((1-beta) K).

The corresponding r(t) = (r0^(1-beta) - (1-beta) K t)^(1/(1-beta)) is a
re-derivation from the first-order relation; a differently exponented
closed form in circulation is inconsistent with that relation, which is
why the integration cross-check below is mandatory before the closed
time is trusted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CollisionError, DomainError
from .flatlp import _net_weights
from .measures import AtomicMeasure
from .model import ModelParams, ParticleState


@dataclass
class ReducedState:
    t: float
    r: float
    rdot: float


def reduced_rhs(s: ReducedState, params: ModelParams):
    """(dr, drdot) of the separation ODE; friction opposes rdot."""
    if s.r <= 0.0:
        raise CollisionError("reduced separation reached zero")
    m = abs(s.rdot)
    drdot = 0.0 if m == 0.0 else -s.rdot * m ** (params.p - 2.0) * s.r ** (-params.alpha)
    return s.rdot, drdot


# ----------------------------------------------------------------------
# independent adaptive RK4 (step doubling)
# ----------------------------------------------------------------------

def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_reduced(
    r0: float,
    rdot0: float,
    params: ModelParams,
    t_end: float | None = None,
    stop_r: float | None = None,
    tol: float = 1e-12,
    atol: float | None = None,
    freeze_rdot_below: float = 0.0,
    max_steps: int = 2_000_000,
):
    """Integrate the separation ODE from (r0, rdot0).

    Stops at ``t_end`` or when r first reaches ``stop_r`` (located by
    bisection inside the crossing step).  Returns (ReducedState,
    hit_stop).  Error control is classic step doubling: a full step is
    compared against two half steps and accepted when ``|diff| <= atol
    + tol |y|`` componentwise (atol defaults to tol; pass a tiny atol
    for pure-relative control on deep collision descents).

    ``freeze_rdot_below``: rdot = 0 is an exact fixed point of the
    friction law, but for p < 3 the right-hand side is not smooth
    there and the stepper grinds once the relative velocity has
    decayed to roundoff.  Setting a positive threshold snaps rdot to
    exactly zero below it (long-horizon avoidance runs only; keep it
    at 0 for collision descents, where rdot legitimately passes
    through tiny values).
    """
    if r0 <= 0.0:
        raise DomainError("r0 must be positive")
    if t_end is None and stop_r is None:
        raise ValueError("need t_end and/or stop_r")
    if atol is None:
        atol = tol

    def f(t, y):
        r, rd = y
        if r <= 1e-200:  # collision for all practical purposes; also
            raise CollisionError("separation vanished")  # keeps r**-alpha finite
        m = abs(rd)
        dd = 0.0 if m == 0.0 else -rd * m ** (params.p - 2.0) * r ** (-params.alpha)
        return np.array([rd, dd])

    t = 0.0
    y = np.array([float(r0), float(rdot0)])
    h = min(1e-3, (t_end or 1.0) / 10.0) if t_end else 1e-3
    steps = 0
    while True:
        if freeze_rdot_below > 0.0 and abs(y[1]) < freeze_rdot_below:
            y[1] = 0.0
        if t_end is not None and t >= t_end:
            return ReducedState(t, y[0], y[1]), False
        if stop_r is not None and y[0] <= stop_r:
            return ReducedState(t, y[0], y[1]), True
        if y[1] == 0.0:  # exact fixed point: nothing moves any more
            if t_end is None:
                return ReducedState(t, y[0], y[1]), False
            return ReducedState(t_end, y[0], y[1]), False
        if t_end is not None:
            h = min(h, t_end - t)
        while True:
            steps += 1
            if steps > max_steps:
                raise RuntimeError("reduced integration step budget exceeded")
            try:
                big = _rk4_step(f, t, y, h)
                half = _rk4_step(f, t, y, 0.5 * h)
                two = _rk4_step(f, t + 0.5 * h, half, 0.5 * h)
            except CollisionError:
                h *= 0.5
                continue
            sc = atol + tol * np.abs(y)
            err = float(np.max(np.abs(two - big) / sc)) / 15.0
            if err <= 1.0 or h <= 1e-16 * max(1.0, t):
                break
            h *= max(0.25, 0.9 * err ** (-0.2))
        y_new = two + (two - big) / 15.0  # local extrapolation, 5th order
        if params.p < 2.0 and y_new[1] != 0.0:
            # p < 2 extinguishes the relative velocity in finite time
            # tau = w^(2-p) r^alpha / (2-p); once extinction falls
            # inside the current step, snap to the sticking branch
            # (rdot = 0 is the physical continuation; the friction law
            # vanishes there identically).  The snap changes r by at
            # most |rdot| tau.
            w = abs(y_new[1])
            tau = w ** (2.0 - params.p) * y_new[0] ** params.alpha / (2.0 - params.p)
            if y[1] * y_new[1] < 0.0 or tau <= h:
                y_new[1] = 0.0
        if stop_r is not None and y_new[0] <= stop_r:
            # bisect the step for the crossing point
            lo, hi = 0.0, h
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                ym = _rk4_step(f, t, y, mid)
                if ym[0] <= stop_r:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-15 * max(h, 1.0):
                    break
            ystop = _rk4_step(f, t, y, hi)
            return ReducedState(t + hi, ystop[0], ystop[1]), True
        t += h
        y = y_new
        if err > 0.0:
            h = min(h * min(4.0, 0.9 * err ** (-0.2)), h * 4.0)
        else:
            h *= 4.0


# ----------------------------------------------------------------------
# matched data and closed forms
# ----------------------------------------------------------------------

def _require_collision_regime(params: ModelParams):
    if not (params.alpha > 1.0 and params.p > max(params.alpha + 2.0, 3.0)):
        raise DomainError("closed form needs alpha > 1 and p > alpha + 2")


def matched_initial_velocity(r0: float, params: ModelParams) -> float:
    """Initial rdot making the first integral's constant vanish:
    (1/(p-3)) (-rdot0)^(3-p) = (1/(alpha-1)) r0^(1-alpha)."""
    _require_collision_regime(params)
    if r0 <= 0.0:
        raise DomainError("r0 must be positive")
    a, p = params.alpha, params.p
    return -(((p - 3.0) / (a - 1.0)) * r0 ** (1.0 - a)) ** (1.0 / (3.0 - p))


def collision_time(r0: float, params: ModelParams) -> float:
    """Closed-form collision time for matched data (alpha > 1 branch)."""
    _require_collision_regime(params)
    if r0 <= 0.0:
        raise DomainError("r0 must be positive")
    a, p = params.alpha, params.p
    beta = (a - 1.0) / (p - 3.0)
    K = ((p - 3.0) / (a - 1.0)) ** (1.0 / (3.0 - p))
    return r0 ** (1.0 - beta) / ((1.0 - beta) * K)


def collision_time_partial(r0: float, r1: float, params: ModelParams) -> float:
    """Closed-form time for the matched separation to fall r0 -> r1."""
    return collision_time(r0, params) - collision_time(r1, params)


def matched_initial_velocity_alpha1(r0: float, p: float) -> float:
    """alpha = 1 matched relation: (1/(p-3)) (-rdot0)^(3-p) = -ln r0."""
    if not (p > 3.0):
        raise DomainError("alpha = 1 matched data needs p > 3")
    if not (0.0 < r0 < 1.0):
        raise DomainError("alpha = 1 matched data needs 0 < r0 < 1")
    return -((p - 3.0) * (-np.log(r0))) ** (1.0 / (3.0 - p))


def collision_bound_alpha1(r0: float, params: ModelParams) -> float:
    """Upper bound on the collision time for alpha = 1, p > 3 and
    matched data with r0 < exp(-1/(p-3)).

    Derived from integrating the separated relation by parts: the
    nonnegative quantity r ((p-3)(-ln r))^(1/(p-3)) decreases at least
    linearly with slope 1 - 1/((p-3)(-ln r0)), which must reach zero by

        t* = r0 ((p-3)(-ln r0))^(1/(p-3)) / (1 - 1/((p-3)(-ln r0))).
    """
    p = params.p
    if params.alpha != 1.0 or p <= 3.0:
        raise DomainError("bound needs alpha = 1 and p > 3")
    if not (0.0 < r0 < np.exp(-1.0 / (p - 3.0))):
        raise DomainError("bound needs r0 < exp(-1/(p-3))")
    g = (p - 3.0) * (-np.log(r0))  # equals (3-p) ln r0, > 1 here
    return r0 * g ** (1.0 / (p - 3.0)) / (1.0 - 1.0 / g)


def two_particle_state(r0: float, rdot0: float, d: int = 1) -> ParticleState:
    """Symmetric two-particle embedding of the reduced data on axis 0."""
    x = np.zeros((2, d))
    v = np.zeros((2, d))
    x[0, 0], x[1, 0] = -0.5 * r0, 0.5 * r0
    v[0, 0], v[1, 0] = -0.5 * rdot0, 0.5 * rdot0
    return ParticleState(0.0, x, v)


# ----------------------------------------------------------------------
# brute-force references
# ----------------------------------------------------------------------

def force_bruteforce(state: ParticleState, params: ModelParams) -> np.ndarray:
    """Textbook double loop over the full force sum, no antisymmetric
    accumulation; reference for the production pairwise kernel."""
    n, d = state.x.shape
    out = np.zeros((n, d))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dx = state.x[j] - state.x[i]
            r = float(np.sqrt(np.dot(dx, dx) + params.reg_delta**2))
            if r == 0.0:
                raise CollisionError("coincident positions in brute force")
            dv = state.v[j] - state.v[i]
            m = float(np.sqrt(np.dot(dv, dv)))
            if m == 0.0:
                continue
            out[i] += m ** (params.p - 2.0) * dv / r**params.alpha
    return out / n


def dbl_bruteforce(
    mu: AtomicMeasure, nu: AtomicMeasure, n_random: int = 10_000, seed: int = 0
) -> float:
    """Randomized lower bound on the bounded-Lipschitz distance.

    Random test values at the union support are projected onto the
    feasible set: cyclic pair sweeps toward the Lipschitz constraints,
    then an exact inf-convolution repair phi_k <- min_l (phi_l + d_kl)
    (which enforces every pair constraint thanks to the triangle
    inequality) and clipping to [-1, 1].  Every candidate is feasible,
    so the best objective never exceeds the LP optimum.
    """
    pts, net = _net_weights(mu.points, mu.weights, nu.points, nu.weights)
    n = len(net)
    if n == 0:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    rng = np.random.default_rng(seed)
    best = 0.0  # phi = 0 is feasible
    chunk = max(1, min(n_random, 200_000 // max(n, 1)))
    done = 0
    while done < n_random:
        b = min(chunk, n_random - done)
        done += b
        phi = rng.uniform(-1.0, 1.0, size=(b, n))
        # a few cyclic half-corrections pull values toward feasibility
        for _ in range(2):
            for k in range(n):
                viol = phi - (phi[:, k][:, None] + dist[k][None, :])
                np.maximum(viol, 0.0, out=viol)
                phi -= 0.5 * viol
        # exact repair: inf-convolution with the distance, then box clip
        phi = (phi[:, None, :] + dist[None, :, :]).min(axis=2)
        np.clip(phi, -1.0, 1.0, out=phi)
        vals = phi @ net
        m = float(np.abs(vals).max())
        if m > best:
            best = m
    return best
