"""Atomic-measure algebra and measure-level checks.

Covers empirical phase measures, position marginals, cell-aggregated
local fields with velocity spread (the monokineticity diagnostic), the
exact bounded-Lipschitz distance, the position-rewind pushforward
T(x, v) = (x - dt v, v), weighted transported measures, and the local
mass-preservation inequality check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import flatlp
from .model import ParticleState


@dataclass
class AtomicMeasure:
    """Weighted point cloud in R^k (atoms + nonnegative weights)."""

    points: np.ndarray  # (n, k)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("points and weights length mismatch")
        if not np.isfinite(self.points).all():
            raise ValueError("atoms must be finite")
        if (self.weights < 0).any():
            raise ValueError("weights must be nonnegative")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def k(self) -> int:
        return self.points.shape[1]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def is_probability(self, tol: float = 1e-12) -> bool:
        return abs(self.mass - 1.0) <= tol

    def merged(self) -> "AtomicMeasure":
        """Merge bitwise-identical atoms, summing weights.

        Exact equality only; no epsilon matching (prevents silent mass
        migration between nearby atoms)."""
        seen: dict[bytes, int] = {}
        pts: list[np.ndarray] = []
        ws: list[float] = []
        for row, w in zip(self.points, self.weights):
            key = row.tobytes()
            i = seen.get(key)
            if i is None:
                seen[key] = len(pts)
                pts.append(row)
                ws.append(float(w))
            else:
                ws[i] += float(w)
        return AtomicMeasure(np.array(pts), np.array(ws))

    def integrate(self, f) -> float:
        """sum_i w_i f(z_i) for a vectorized test function."""
        return float(np.dot(self.weights, np.asarray(f(self.points), dtype=np.float64)))


def empirical(state: ParticleState) -> AtomicMeasure:
    """Uniform-weight phase-space measure of a particle state."""
    pts = np.hstack([state.x, state.v])
    w = np.full(state.n, 1.0 / state.n)
    return AtomicMeasure(pts, w)


def _split_phase(mu: AtomicMeasure):
    if mu.k % 2 != 0:
        raise ValueError("phase-space measure needs even dimension 2d")
    d = mu.k // 2
    return mu.points[:, :d], mu.points[:, d:], d


def marginal_x(mu: AtomicMeasure) -> AtomicMeasure:
    """Position marginal; coincident projections merge exactly."""
    xs, _, _ = _split_phase(mu)
    return AtomicMeasure(xs, mu.weights.copy()).merged()


@dataclass
class CellStats:
    mass: float
    x_mean: np.ndarray
    mean_velocity: np.ndarray
    spread: float  # mass-weighted mean |v - u_c|^2 (population form)


@dataclass
class LocalField:
    """Per-cell aggregation of a phase measure on an origin-anchored
    lattice of cell size h (per-axis)."""

    h: np.ndarray
    d: int
    cells: dict[tuple, CellStats] = field(default_factory=dict)

    @property
    def total_mass(self) -> float:
        return float(sum(c.mass for c in self.cells.values()))

    @property
    def monokineticity_W(self) -> float:
        return float(sum(c.mass * c.spread for c in self.cells.values()))

    def largest_cell_mass(self) -> float:
        return max((c.mass for c in self.cells.values()), default=0.0)


def local_field(mu: AtomicMeasure, h) -> LocalField:
    """Aggregate mass, mean velocity and velocity spread per cell.

    Spread is the population second moment of v within the cell (the
    measure-theoretic variance, no sample correction); empty cells
    carry no statistics.
    """
    xs, vs, d = _split_phase(mu)
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), (d,)).copy()
    if (h <= 0).any():
        raise ValueError("cell size must be positive")
    keys = np.floor(xs / h).astype(np.int64)
    out = LocalField(h=h, d=d)
    order: dict[tuple, list[int]] = {}
    for idx, key in enumerate(map(tuple, keys)):
        order.setdefault(key, []).append(idx)
    for key, rows in order.items():
        w = mu.weights[rows]
        mass = float(w.sum())
        if mass == 0.0:
            continue
        xm = (w[:, None] * xs[rows]).sum(axis=0) / mass
        u = (w[:, None] * vs[rows]).sum(axis=0) / mass
        dv = vs[rows] - u
        spread = float((w * np.einsum("ij,ij->i", dv, dv)).sum() / mass)
        out.cells[key] = CellStats(mass=mass, x_mean=xm, mean_velocity=u, spread=spread)
    return out


def monokineticity_W(mu: AtomicMeasure, h) -> float:
    """Total mass-weighted velocity spread; 0 iff v is cellwise constant."""
    return local_field(mu, h).monokineticity_W


@dataclass
class FlatResult:
    value: float
    approximated: bool
    n_support: int
    lp_residual: float


def flat_distance(
    mu: AtomicMeasure, nu: AtomicMeasure, cap: int = 2000, seed: int = 0
) -> FlatResult:
    """Bounded-Lipschitz distance with the documented support cap.

    Measures whose support exceeds ``cap`` atoms are resampled to the
    cap (deterministic seed) and the result is flagged approximate.
    """
    if mu.k != nu.k:
        raise ValueError("measures live in different ambient dimensions")
    approx = False

    def capped(m: AtomicMeasure, salt: int) -> AtomicMeasure:
        nonlocal approx
        if m.n <= cap:
            return m
        approx = True
        rng = np.random.default_rng(seed + salt)
        prob = m.weights / m.mass
        idx = rng.choice(m.n, size=cap, p=prob)
        return AtomicMeasure(m.points[idx], np.full(cap, m.mass / cap))

    a = capped(mu.merged(), 0)
    b = capped(nu.merged(), 1)
    value, residual = flatlp.flat_metric(a.points, a.weights, b.points, b.weights)
    return FlatResult(
        value=value,
        approximated=approx,
        n_support=a.n + b.n,
        lp_residual=residual,
    )


def dbl_distance(mu: AtomicMeasure, nu: AtomicMeasure, cap: int = 2000, seed: int = 0) -> float:
    """Exact bounded-Lipschitz distance (value only)."""
    return flat_distance(mu, nu, cap=cap, seed=seed).value


def pushforward_T(mu: AtomicMeasure, t0: float, t: float) -> AtomicMeasure:
    """Rewind positions by the elapsed velocity transport:
    (x, v) -> (x - (t - t0) v, v); weights unchanged."""
    xs, vs, _ = _split_phase(mu)
    return AtomicMeasure(np.hstack([xs - (t - t0) * vs, vs]), mu.weights.copy())


def sf_measure(mu: AtomicMeasure, t0: float, t: float, phi) -> AtomicMeasure:
    """Velocity-weighted transported position measure.

    Atoms sit at x_i - (t - t0) v_i with weights phi(v_i) w_i; phi must
    be nonnegative and bounded on the support."""
    xs, vs, _ = _split_phase(mu)
    pw = np.asarray(phi(vs), dtype=np.float64)
    if pw.shape != (mu.n,):
        raise ValueError("phi must map (n, d) velocities to (n,) values")
    if not np.isfinite(pw).all() or (pw < 0).any():
        raise ValueError("phi must be nonnegative and finite on the support")
    return AtomicMeasure(xs - (t - t0) * vs, pw * mu.weights)


def box_mass(rho: AtomicMeasure, lo, hi, fatten: float = 0.0) -> float:
    """Mass within Euclidean distance ``fatten`` of the box [lo, hi]."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    gap = np.maximum(np.maximum(lo - rho.points, rho.points - hi), 0.0)
    dist = np.sqrt(np.einsum("ij,ij->i", gap, gap))
    return float(rho.weights[dist <= fatten + 1e-15].sum())


def mp_check(
    rho_t0: AtomicMeasure,
    rho_t: AtomicMeasure,
    box,
    M: float,
    dt: float,
    tol: float = 1e-12,
) -> bool:
    """Local mass preservation: the box fattened by dt*M at the later
    time must hold at least the mass the box held at the earlier time."""
    lo, hi = box
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    before = box_mass(rho_t0, lo, hi)
    after = box_mass(rho_t, lo, hi, fatten=dt * M)
    return after >= before - tol
