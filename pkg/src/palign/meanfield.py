"""Initial-data atomization, weak-form residuals and N-scaling studies.

Atomization draws positions i.i.d. from a named compactly supported
density and evaluates a named velocity field at them.  Atoms are drawn
one at a time from a single seeded stream, so a fixed spec reproduces
its cloud bit-for-bit, and the first N atoms of a 2N-cloud with the
same seed coincide with the N-cloud.  Doubling studies give each
(seed, N) run its own derived stream, so consecutive-N distances
compare two independent draws and decay like the sampling error.

Weak-form residuals evaluate the transported-test identities of the
kinetic and hydrodynamic descriptions on a sampled trajectory, with
time integrals by trapezoid on the sampled grid.  For exact particle
trajectories both identities hold identically, so the residuals
measure integrator plus quadrature error only.  Sign conventions are
fixed by symmetrizing the interaction sum for the simulated dynamics
(dv_i = (1/N) sum_j h_ij (v_j - v_i)):

    d/dt (1/N) sum_i phi_i  picks up the interaction term
    -(1/2N^2) sum_{i != j} h_ij (grad_v phi_i - grad_v phi_j) . (v_i - v_j),

and the hydrodynamic momentum identity carries the mirrored
+(1/2) double integral on its right-hand side.  The test suite pins
both signs numerically against sign-flipped variants.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from .diagnostics import kinetic_energy
from .errors import DegenerateSupportError
from .measures import AtomicMeasure, dbl_distance, empirical, local_field, marginal_x
from .model import ModelParams, ParticleState
from .testbank import kinetic_bank, macro_banks, support_box

if TYPE_CHECKING:  # pragma: no cover
    from .integrator import IntegratorConfig, Trajectory


# ----------------------------------------------------------------------
# initial data
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class InitialDataSpec:
    """Named compactly supported density + bounded velocity field + seed.

    rho0 kinds: uniform_box(center, half_widths), uniform_ball(center,
    radius), truncated_gaussian(center, sigma, radius), mixture(
    components, weights).  u0 kinds: constant(value), linear(matrix,
    offset), shear(axis_flow, axis_grad, rate), two_cluster(axis,
    speed, closing).
    """

    rho0: dict
    u0: dict
    seed: int = 0

    def dimension(self) -> int:
        kind = self.rho0["kind"]
        if kind == "mixture":
            return len(np.atleast_1d(self.rho0["components"][0]["center"]))
        return len(np.atleast_1d(self.rho0["center"]))

    def to_dict(self) -> dict:
        return {"rho0": self.rho0, "u0": self.u0, "seed": self.seed}

    @classmethod
    def from_dict(cls, obj: dict) -> "InitialDataSpec":
        return cls(rho0=obj["rho0"], u0=obj["u0"], seed=int(obj.get("seed", 0)))


def _draw_atom(rho0: dict, rng) -> np.ndarray:
    kind = rho0["kind"]
    if kind == "uniform_box":
        c = np.asarray(rho0["center"], dtype=np.float64)
        hw = np.asarray(rho0["half_widths"], dtype=np.float64)
        if (hw <= 0).any():
            raise DegenerateSupportError("uniform_box needs positive half widths")
        return c + hw * rng.uniform(-1.0, 1.0, size=c.shape)
    if kind == "uniform_ball":
        c = np.asarray(rho0["center"], dtype=np.float64)
        radius = float(rho0["radius"])
        if radius <= 0:
            raise DegenerateSupportError("uniform_ball needs positive radius")
        d = len(c)
        vec = rng.normal(size=d)
        norm = float(np.sqrt(np.dot(vec, vec)))
        while norm == 0.0:  # probability zero, still guarded
            vec = rng.normal(size=d)
            norm = float(np.sqrt(np.dot(vec, vec)))
        r = radius * rng.uniform() ** (1.0 / d)
        return c + r * vec / norm
    if kind == "truncated_gaussian":
        c = np.asarray(rho0["center"], dtype=np.float64)
        sigma = float(rho0["sigma"])
        radius = float(rho0["radius"])
        if sigma <= 0 or radius <= 0:
            raise DegenerateSupportError("truncated_gaussian needs sigma, radius > 0")
        while True:
            cand = c + sigma * rng.normal(size=c.shape)
            if float(np.linalg.norm(cand - c)) <= radius:
                return cand
    if kind == "mixture":
        weights = np.asarray(rho0["weights"], dtype=np.float64)
        weights = weights / weights.sum()
        u = rng.uniform()
        comp = int(np.searchsorted(np.cumsum(weights), u))
        comp = min(comp, len(weights) - 1)
        return _draw_atom(rho0["components"][comp], rng)
    raise ValueError("unknown density kind %r" % kind)


def velocity_field(u0: dict):
    """Vectorized velocity field X (n, d) -> (n, d) for a named kind."""
    kind = u0["kind"]
    if kind == "constant":
        val = np.asarray(u0["value"], dtype=np.float64)
        return lambda X: np.broadcast_to(val, X.shape).copy()
    if kind == "linear":
        A = np.asarray(u0["matrix"], dtype=np.float64)
        b = np.asarray(u0["offset"], dtype=np.float64)
        return lambda X: X @ A.T + b
    if kind == "shear":
        axis_flow = int(u0["axis_flow"])
        axis_grad = int(u0["axis_grad"])
        rate = float(u0["rate"])

        def shear(X):
            out = np.zeros_like(X)
            out[:, axis_flow] = rate * X[:, axis_grad]
            return out

        return shear
    if kind == "two_cluster":
        axis = int(u0.get("axis", 0))
        speed = float(u0["speed"])
        closing = bool(u0.get("closing", False))
        sgn = -1.0 if closing else 1.0

        def two_cluster(X):
            out = np.zeros_like(X)
            out[:, axis] = sgn * speed * np.where(X[:, axis] >= 0.0, 1.0, -1.0)
            return out

        return two_cluster
    raise ValueError("unknown velocity kind %r" % kind)


def atomize(spec: InitialDataSpec, N: int) -> ParticleState:
    """Draw N distinct atoms from rho0 and evaluate u0 at them.

    Exact positional duplicates are redrawn so the state is
    non-collisional; same spec and seed give bit-identical states.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    rng = np.random.default_rng(spec.seed)
    d = spec.dimension()
    xs = np.empty((N, d))
    seen: set[bytes] = set()
    for i in range(N):
        while True:
            atom = _draw_atom(spec.rho0, rng)
            key = atom.tobytes()
            if key not in seen:
                seen.add(key)
                xs[i] = atom
                break
    vs = velocity_field(spec.u0)(xs)
    return ParticleState(0.0, xs, vs)


# ----------------------------------------------------------------------
# weak-form residuals
# ----------------------------------------------------------------------

def _pair_kernel(X, V, alpha, p):
    """h_ij = |dv|^(p-2) / r^alpha with zero diagonal/zero-dv pairs.

    Needs p >= 2 for the separated form; smaller p falls back to a
    guarded direct evaluation.
    """
    dx = X[:, None, :] - X[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", dx, dx)
    dv = V[:, None, :] - V[None, :, :]
    m2 = np.einsum("ijk,ijk->ij", dv, dv)
    with np.errstate(divide="ignore", invalid="ignore"):
        if p >= 2.0:
            h = np.where(m2 > 0.0, m2 ** ((p - 2.0) / 2.0) / r2 ** (alpha / 2.0), 0.0)
        else:
            m = np.sqrt(m2)
            h = np.where(
                m2 > 0.0,
                np.maximum(m, 1e-300) ** (p - 2.0) / r2 ** (alpha / 2.0),
                0.0,
            )
    np.fill_diagonal(h, 0.0)
    return h


def _interaction_contraction(h, V, G):
    """(1/N^2) sum_{i != j} h_ij (G_i - G_j) . (V_i - V_j).

    Expanded as 2 sum_i (h row)_i G_i.V_i - 2 sum_i G_i . (h V)_i using
    the symmetry of h, so no (N, N, d) intermediate is formed.
    """
    n = h.shape[0]
    row = h.sum(axis=1)
    gv = np.einsum("ij,ij->i", G, V)
    direct = 2.0 * float(np.dot(row, gv))
    cross = 2.0 * float(np.einsum("ia,ia->", G, h @ V))
    return (direct - cross) / (n * n)


def weak_residual_kinetic(traj: "Trajectory", test_bank=None) -> dict[str, float]:
    """Residuals of the transported-test identity of the kinetic form.

    For each test, |initial term + transport integral + interaction
    integral| with time integrals by trapezoid on the sampled grid.
    """
    states = [s.state for s in traj.steps]
    ts = np.array([s.t for s in states])
    T = ts[-1]
    if test_bank is None:
        center, half = support_box(states)
        test_bank = kinetic_bank(T, center, half)
    p, alpha = traj.params.p, traj.params.alpha
    nb = len(test_bank)
    transport = np.zeros(nb)
    interact = np.zeros(nb)
    w = np.zeros(len(ts))
    w[:-1] += 0.5 * np.diff(ts)
    w[1:] += 0.5 * np.diff(ts)
    for s, state in enumerate(states):
        X, V, t = state.x, state.v, state.t
        h = _pair_kernel(X, V, alpha, p)
        for b, test in enumerate(test_bank):
            tv = test.dt(t, X, V) + np.einsum(
                "ij,ij->i", V, test.grad_x(t, X, V)
            )
            transport[b] += w[s] * float(np.mean(tv))
            G = test.grad_v(t, X, V)
            interact[b] += w[s] * (-0.5) * _interaction_contraction(h, V, G)
    out = {}
    for b, test in enumerate(test_bank):
        X0, V0 = states[0].x, states[0].v
        initial = float(np.mean(test.value(ts[0], X0, V0)))
        out[test.name] = abs(initial + transport[b] + interact[b])
    return out


@dataclass
class MacroResiduals:
    continuity: dict[str, float]
    momentum: dict[str, float]
    excluded_pair_mass: float  # max over samples of same-cell-excluded mass


def _cell_arrays(state: ParticleState, h):
    lf = local_field(empirical(state), h)
    cells = list(lf.cells.values())
    m = np.array([c.mass for c in cells])
    xc = np.array([c.x_mean for c in cells])
    uc = np.array([c.mean_velocity for c in cells])
    return m, xc, uc


def weak_residual_macro(
    traj: "Trajectory", h, scalar_tests=None, vector_tests=None
) -> MacroResiduals:
    """Residuals of the cell-aggregated hydrodynamic identities.

    Cell pairs closer than the cell size (including same-cell pairs)
    are excluded from the singular double sum; the excluded pair mass
    is reported so its weight can be judged.
    """
    states = [s.state for s in traj.steps]
    ts = np.array([s.t for s in states])
    T = ts[-1]
    if scalar_tests is None or vector_tests is None:
        center, half = support_box(states)
        sc, vc = macro_banks(T, center, half)
        scalar_tests = scalar_tests if scalar_tests is not None else sc
        vector_tests = vector_tests if vector_tests is not None else vc
    p, alpha = traj.params.p, traj.params.alpha
    r_excl = float(np.min(np.broadcast_to(np.asarray(h, dtype=np.float64), (states[0].d,))))

    w = np.zeros(len(ts))
    w[:-1] += 0.5 * np.diff(ts)
    w[1:] += 0.5 * np.diff(ts)

    cont = np.zeros(len(scalar_tests))
    mom_transport = np.zeros(len(vector_tests))
    mom_force = np.zeros(len(vector_tests))
    excluded = 0.0
    cell_data = [_cell_arrays(s, h) for s in states]
    for s, (m, xc, uc) in enumerate(cell_data):
        t = ts[s]
        for b, test in enumerate(scalar_tests):
            tv = test.dt(t, xc) + np.einsum("ij,ij->i", uc, test.grad_x(t, xc))
            cont[b] += w[s] * float(np.dot(m, tv))
        dxc = xc[:, None, :] - xc[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", dxc, dxc))
        duc = uc[:, None, :] - uc[None, :, :]
        mu2 = np.einsum("ijk,ijk->ij", duc, duc)
        mask = dist >= r_excl
        pairm = np.outer(m, m)
        excl_now = float(pairm[(~mask) & ~np.eye(len(m), dtype=bool)].sum())
        excluded = max(excluded, excl_now)
        with np.errstate(divide="ignore", invalid="ignore"):
            ker = np.where(
                mask & (mu2 > 0.0),
                mu2 ** ((p - 2.0) / 2.0) / np.where(mask, dist, 1.0) ** alpha,
                0.0,
            )
        for b, test in enumerate(vector_tests):
            phi = test.value(t, xc)
            jac = test.jac(t, xc)
            tv = np.einsum("ij,ij->i", test.dt(t, xc), uc) + np.einsum(
                "ia,iab,ib->i", uc, jac, uc
            )
            mom_transport[b] += w[s] * float(np.dot(m, tv))
            dphi = phi[:, None, :] - phi[None, :, :]
            inner = np.einsum("ijk,ijk->ij", dphi, duc)
            mom_force[b] += w[s] * 0.5 * float((pairm * ker * inner).sum())

    out_c = {}
    m0, xc0, _ = cell_data[0]
    for b, test in enumerate(scalar_tests):
        initial = float(np.dot(m0, test.value(ts[0], xc0)))
        out_c[test.name] = abs(initial + cont[b])
    out_m = {}
    _, _, uc0 = cell_data[0]
    for b, test in enumerate(vector_tests):
        initial = float(np.dot(m0, np.einsum("ij,ij->i", uc0, test.value(ts[0], xc0))))
        out_m[test.name] = abs(initial + mom_transport[b] - mom_force[b])
    return MacroResiduals(
        continuity=out_c, momentum=out_m, excluded_pair_mass=excluded
    )


def energy_inequality_check(traj: "Trajectory", h, tol: float = 1e-6):
    """Cell-level dissipation bound: returns (ok, slack).

    slack = [cell energy drop] - [integral of the cell-level singular
    double sum]; nonnegative slack (within tol) means the aggregated
    data dissipates at least as fast as the singular integral demands.
    """
    states = [s.state for s in traj.steps]
    ts = np.array([s.t for s in states])
    p, alpha = traj.params.p, traj.params.alpha
    r_excl = float(np.min(np.broadcast_to(np.asarray(h, dtype=np.float64), (states[0].d,))))
    rate = np.zeros(len(ts))
    energy = np.zeros(len(ts))
    for s, state in enumerate(states):
        m, xc, uc = _cell_arrays(state, h)
        energy[s] = float(np.dot(m, np.einsum("ij,ij->i", uc, uc)))
        dxc = xc[:, None, :] - xc[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", dxc, dxc))
        duc = uc[:, None, :] - uc[None, :, :]
        mu2 = np.einsum("ijk,ijk->ij", duc, duc)
        mask = dist >= r_excl
        with np.errstate(divide="ignore", invalid="ignore"):
            ker = np.where(
                mask & (mu2 > 0.0),
                mu2 ** (p / 2.0) / np.where(mask, dist, 1.0) ** alpha,
                0.0,
            )
        rate[s] = float((np.outer(m, m) * ker).sum())
    lhs = float(np.trapezoid(rate, ts))
    slack = (energy[0] - energy[-1]) - lhs
    return bool(slack >= -tol), float(slack)


# ----------------------------------------------------------------------
# N-doubling convergence studies
# ----------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    N_list: list[int]
    checkpoints: list[float]
    seeds: list[int]
    h: float
    dbl_density: np.ndarray  # (seeds, pairs, checkpoints)
    dbl_phase: np.ndarray  # (seeds, pairs, checkpoints)
    W: np.ndarray  # (seeds, N, checkpoints)
    E: np.ndarray  # (seeds, N, checkpoints)
    largest_cell_mass: np.ndarray  # (seeds, N, checkpoints)
    trend: dict = field(default_factory=dict)

    def median_density_trend(self) -> np.ndarray:
        return np.median(self.dbl_density[:, :, -1], axis=0)

    def median_W_trend(self) -> np.ndarray:
        return np.median(self.W[:, :, -1], axis=0)

    def to_summary(self) -> dict:
        return {
            "N_list": self.N_list,
            "checkpoints": self.checkpoints,
            "seeds": self.seeds,
            "h": self.h,
            "median_dbl_density_final": self.median_density_trend().tolist(),
            "median_dbl_phase_final": np.median(self.dbl_phase[:, :, -1], axis=0).tolist(),
            "median_W_final": self.median_W_trend().tolist(),
            "median_E_final": np.median(self.E[:, :, -1], axis=0).tolist(),
            "median_largest_cell_mass_final": np.median(
                self.largest_cell_mass[:, :, -1], axis=0
            ).tolist(),
            "trend": self.trend,
        }


def trend_non_increasing(values, doublings_per_inversion: int = 4) -> bool:
    """Monotone trend with at most one inversion per 4 doublings.

    Increases within floating roundoff of the neighboring values do
    not count as inversions.
    """
    vals = np.asarray(values, dtype=np.float64)
    steps = len(vals) - 1
    if steps <= 0:
        return True
    allowed = max(1, math.ceil(steps / doublings_per_inversion))
    slack = 1e-9 * np.maximum(np.abs(vals[:-1]), np.abs(vals[1:])) + 1e-30
    inversions = int(np.sum(np.diff(vals) > slack))
    return inversions <= allowed


def _study_single_run(args):
    spec_dict, params_dict, N, checkpoints, config_dict, h = args
    from .integrator import IntegratorConfig, run

    spec = InitialDataSpec.from_dict(spec_dict)
    params = replace(ModelParams.from_dict(params_dict), n_particles=N)
    config = IntegratorConfig.from_dict(config_dict)
    state = atomize(spec, N)
    out = []
    t_prev = 0.0
    for tk in checkpoints:
        if tk > t_prev:
            traj = run(state, params, config, t_end=tk, observer_stride=10**9,
                       with_diagnostics=False)
            if traj.events:
                raise RuntimeError(
                    "study run hit %s at t=%.6g (N=%d, seed=%d)"
                    % (traj.events[0].kind, traj.events[0].t, N, spec.seed)
                )
            state = traj.final_state
            t_prev = tk
        mu = empirical(state)
        lf = local_field(mu, h)
        out.append(
            {
                "x": state.x.copy(),
                "v": state.v.copy(),
                "E": kinetic_energy(state),
                "W": lf.monokineticity_W,
                "max_cell": lf.largest_cell_mass(),
            }
        )
    return out


def convergence_study(
    spec: InitialDataSpec,
    params: ModelParams,
    N_list,
    T: float,
    checkpoints,
    h: float,
    seeds,
    config: "IntegratorConfig",
    n_jobs: int = 1,
    dbl_cap: int = 2000,
) -> ConvergenceReport:
    """Run the doubling ladder and assemble Cauchy-style trends.

    N_list must strictly double; each (seed, N) run shares the seed
    stream, so consecutive-N clouds are nested draws.
    """
    N_list = [int(n) for n in N_list]
    if any(b != 2 * a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must strictly double")
    checkpoints = sorted(float(t) for t in checkpoints)
    if not checkpoints or abs(checkpoints[-1] - T) > 1e-12:
        checkpoints = list(checkpoints) + [float(T)]
    seeds = [int(s) for s in seeds]

    jobs = []
    for seed in seeds:
        for N in N_list:
            # one independent stream per (seed, N): the Cauchy distances
            # then compare two independent empirical draws, whose gap
            # shrinks like the sampling error
            sp = InitialDataSpec(rho0=spec.rho0, u0=spec.u0, seed=seed * 100_003 + N)
            jobs.append((sp.to_dict(), params.to_dict(), N, checkpoints, config.to_dict(), h))
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_study_single_run, jobs))
    else:
        results = [_study_single_run(j) for j in jobs]

    ns, nn, nc = len(seeds), len(N_list), len(checkpoints)
    W = np.zeros((ns, nn, nc))
    E = np.zeros((ns, nn, nc))
    maxcell = np.zeros((ns, nn, nc))
    dd = np.zeros((ns, nn - 1, nc))
    dp = np.zeros((ns, nn - 1, nc))
    snaps = {}
    for idx, (seed_i, N_i) in enumerate(
        (si, ni) for si in range(ns) for ni in range(nn)
    ):
        snaps[(seed_i, N_i)] = results[idx]
        for ck in range(nc):
            rec = results[idx][ck]
            W[seed_i, N_i, ck] = rec["W"]
            E[seed_i, N_i, ck] = rec["E"]
            maxcell[seed_i, N_i, ck] = rec["max_cell"]
    for si in range(ns):
        for ni in range(nn - 1):
            for ck in range(nc):
                a = snaps[(si, ni)][ck]
                b = snaps[(si, ni + 1)][ck]
                mu_a = AtomicMeasure(
                    np.hstack([a["x"], a["v"]]), np.full(len(a["x"]), 1.0 / len(a["x"]))
                )
                mu_b = AtomicMeasure(
                    np.hstack([b["x"], b["v"]]), np.full(len(b["x"]), 1.0 / len(b["x"]))
                )
                dp[si, ni, ck] = dbl_distance(mu_a, mu_b, cap=dbl_cap)
                dd[si, ni, ck] = dbl_distance(
                    marginal_x(mu_a), marginal_x(mu_b), cap=dbl_cap
                )

    report = ConvergenceReport(
        N_list=N_list,
        checkpoints=checkpoints,
        seeds=seeds,
        h=float(np.min(np.asarray(h, dtype=np.float64))),
        dbl_density=dd,
        dbl_phase=dp,
        W=W,
        E=E,
        largest_cell_mass=maxcell,
    )
    report.trend = {
        "density_cauchy_non_increasing": trend_non_increasing(
            report.median_density_trend()
        ),
        "monokineticity_non_increasing": trend_non_increasing(report.median_W_trend()),
        "energy_non_increasing_each_N": bool(
            np.all(np.diff(E, axis=2) <= 1e-9)
        ),
    }
    return report
