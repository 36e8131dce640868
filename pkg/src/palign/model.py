"""Domain types and the right-hand side of the nonlinear alignment system.

The N-particle system couples velocities through the singular pairwise
law

    dx_i/dt = v_i,
    dv_i/dt = (1/N) sum_{j != i} |v_j - v_i|**(p-2) (v_j - v_i) / r_ij**alpha,

with r_ij the inter-particle distance (optionally mollified as
``sqrt(|dx|^2 + reg_delta^2)``).  A pair with ``v_i == v_j`` contributes
the zero vector: this is the unique continuous extension of
``|dv|**(p-2) dv`` for p > 1 and the convention adopted for p = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import CollisionError, NonFiniteError


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the alignment system.

    alpha : singularity exponent of the communication weight, >= 1
    p     : velocity-coupling exponent, >= 1
    d     : spatial dimension, >= 1
    n_particles : number of agents N, >= 2
    reg_delta   : kernel mollification length; 0 keeps the exact
                  singular kernel (all verification runs use 0)
    """

    alpha: float
    p: float
    d: int
    n_particles: int
    reg_delta: float = 0.0

    def __post_init__(self):
        if self.alpha < 1.0:
            raise ValueError("alpha must be >= 1")
        if self.p < 1.0:
            raise ValueError("p must be >= 1")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.n_particles < 2:
            raise ValueError("n_particles must be >= 2")
        if self.reg_delta < 0.0:
            raise ValueError("reg_delta must be >= 0")

    @property
    def collision_safe(self) -> bool:
        """True iff p <= alpha + 2, the regime with guaranteed
        global non-collisional solutions for non-collisional data."""
        return self.p <= self.alpha + 2.0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "p": self.p,
            "d": self.d,
            "n_particles": self.n_particles,
            "reg_delta": self.reg_delta,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelParams":
        return cls(
            alpha=float(obj["alpha"]),
            p=float(obj["p"]),
            d=int(obj["d"]),
            n_particles=int(obj["n_particles"]),
            reg_delta=float(obj.get("reg_delta", 0.0)),
        )


@dataclass
class ParticleState:
    """Phase-space state: time plus N position/velocity vectors."""

    t: float
    x: np.ndarray  # (N, d)
    v: np.ndarray  # (N, d)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.x.ndim != 2 or self.x.shape != self.v.shape:
            raise ValueError("x and v must both have shape (N, d)")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def copy(self) -> "ParticleState":
        return ParticleState(self.t, self.x.copy(), self.v.copy())

    def validate(self, params: ModelParams | None = None) -> None:
        """Raise if entries are non-finite or, for the exact kernel,
        two particles coincide."""
        if not (np.isfinite(self.x).all() and np.isfinite(self.v).all()):
            raise NonFiniteError("state contains non-finite entries")
        if params is not None and params.reg_delta == 0.0:
            dmin, _ = backend.pair_stats(self.x, self.v)
            if dmin == 0.0:
                raise CollisionError("coincident particle positions")


@dataclass
class PhaseDerivative:
    """Right-hand side split into dx (= v) and dv (accelerations)."""

    dx: np.ndarray
    dv: np.ndarray


def pairwise_force(state: ParticleState, params: ModelParams) -> np.ndarray:
    """Accelerations of the alignment law, shape (N, d).

    The ordered pair loop accumulates each i < j contribution
    antisymmetrically, so sum_i dv_i vanishes to roundoff by
    construction.

    Raises CollisionError on an exact zero distance with the exact
    kernel, NonFiniteError if the output is not finite.
    """
    reg2 = params.reg_delta * params.reg_delta
    acc, status = backend.force_pair_sum(state.x, state.v, params.alpha, params.p, reg2)
    if status == backend.STATUS_COLLISION:
        raise CollisionError("zero pairwise distance at t=%r" % state.t)
    acc /= state.n
    if not np.isfinite(acc).all():
        raise NonFiniteError("non-finite acceleration at t=%r" % state.t)
    return acc


def rhs(state: ParticleState, params: ModelParams) -> PhaseDerivative:
    """Full phase derivative: dx = v, dv = pairwise_force."""
    return PhaseDerivative(dx=state.v.copy(), dv=pairwise_force(state, params))
