"""Command-line entry points.

    palign run          --config run.json [--seed S] [--out DIR]
    palign oracle-sweep --grid grid.json [--out sweep.csv]
    palign dbl          mu.csv nu.csv
    palign study        --config study.json [--jobs K] [--out DIR]

Exit codes: 0 success, 1 error (config or runtime), 2 the run stopped
on a Collision event, 3 a completed study failed a trend assertion.
All randomness is seed-derived; reductions are deterministic (the
``PALIGN_DETERMINISTIC`` environment variable pins this explicitly,
``PALIGN_FORCE_PYTHON`` selects the numpy kernel fallback).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import io as pio
from . import oracle
from .errors import PalignError
from .integrator import IntegratorConfig, run
from .meanfield import InitialDataSpec, atomize, convergence_study
from .measures import flat_distance
from .model import ModelParams, ParticleState

_F = "%.17g"


class ConfigError(Exception):
    pass


def _need(obj: dict, field: str, where: str):
    if field not in obj:
        raise ConfigError("missing field '%s' in %s" % (field, where))
    return obj[field]


def _load_json(path: str, where: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError("%s file not found: %s" % (where, path))
    except json.JSONDecodeError as exc:
        raise ConfigError("%s is not valid JSON (line %d): %s" % (where, exc.lineno, exc.msg))


def _params_from(obj: dict, where: str) -> ModelParams:
    try:
        return ModelParams.from_dict(_need(obj, "params", where))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("bad 'params' in %s: %s" % (where, exc))


def _config_from(obj: dict, where: str) -> IntegratorConfig:
    try:
        return IntegratorConfig.from_dict(obj.get("integrator", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError("bad 'integrator' in %s: %s" % (where, exc))


def _initial_state(obj: dict, params: ModelParams, seed_override):
    kind = _need(obj, "scenario", "run config")
    init = obj.get("initial", {})
    if kind == "two_particle":
        r0 = float(init.get("r0", 1.0))
        if init.get("matched", False):
            if params.alpha > 1.0:
                rdot0 = oracle.matched_initial_velocity(r0, params)
            else:
                rdot0 = oracle.matched_initial_velocity_alpha1(r0, params.p)
        else:
            rdot0 = float(_need(init, "rdot0", "two_particle initial"))
        return oracle.two_particle_state(r0, rdot0, d=params.d)
    if kind in ("random_cloud", "two_cluster"):
        if kind == "two_cluster":
            radius = float(init.get("radius", 0.5))
            spec = InitialDataSpec(
                rho0={"kind": "uniform_ball", "center": [0.0] * params.d, "radius": radius},
                u0={
                    "kind": "two_cluster",
                    "axis": int(init.get("axis", 0)),
                    "speed": float(_need(init, "speed", "two_cluster initial")),
                    "closing": bool(init.get("closing", False)),
                },
                seed=int(init.get("seed", 0)),
            )
        else:
            spec = InitialDataSpec.from_dict(init)
        if seed_override is not None:
            spec = InitialDataSpec(rho0=spec.rho0, u0=spec.u0, seed=int(seed_override))
        if spec.dimension() != params.d:
            raise ConfigError("initial data dimension differs from params.d")
        return atomize(spec, params.n_particles)
    if kind == "from_file":
        path = _need(init, "path", "from_file initial")
        if not os.path.exists(path if path.endswith(".csv") else path + ".csv"):
            raise ConfigError("state file not found: %s" % path)
        mu = pio.load_measure(path)
        if mu.k != 2 * params.d:
            raise ConfigError("state file dimension %d != 2*d" % mu.k)
        x = mu.points[:, : params.d]
        v = mu.points[:, params.d :]
        return ParticleState(0.0, x, v)
    raise ConfigError("unknown scenario kind %r" % kind)


def cmd_run(args) -> int:
    obj = _load_json(args.config, "run config")
    params = _params_from(obj, "run config")
    config = _config_from(obj, "run config")
    state0 = _initial_state(obj, params, args.seed)
    t_end = float(_need(obj, "t_end", "run config"))
    stride = int(obj.get("observer_stride", 1))
    out_dir = args.out or obj.get("out_dir", ".")
    pio.ensure_dir(out_dir)
    emit = obj.get("emit", {})

    traj = run(state0, params, config, t_end, observer_stride=stride)
    base = os.path.join(out_dir, obj.get("name", "trajectory"))
    if emit.get("trajectory", True):
        pio.save_trajectory(traj, base)
    if emit.get("diagnostics", True):
        pio.save_diagnostics_csv(traj, base + "_diagnostics.csv")
    if emit.get("plots_data", False):
        _emit_plot_series(traj, base)
    for e in traj.events:
        print("event: %s at t=%s" % (e.kind, _F % e.t))
    print("final t=%s steps=%d" % (_F % traj.final_state.t, len(traj.steps)))
    if "Collision" in traj.event_kinds():
        return 2
    if "StallMinDt" in traj.event_kinds():
        print("warning: run stalled at dt_min", file=sys.stderr)
    return 0


def _emit_plot_series(traj, base: str):
    with open(base + "_plot_energy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "E", "Dp", "Dalpha"])
        for s in traj.steps:
            g = s.diagnostics
            if g is not None:
                w.writerow([_F % g.t, _F % g.energy_E, _F % g.dissipation_Dp, _F % g.dissipation_Dalpha])
    with open(base + "_plot_extents.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "Vmax", "Xmax", "dmin"])
        for s in traj.steps:
            g = s.diagnostics
            if g is not None:
                w.writerow([_F % g.t, _F % g.max_speed, _F % g.max_position, _F % g.min_pair_dist])


def cmd_oracle_sweep(args) -> int:
    obj = _load_json(args.grid, "sweep grid")
    rows_in = obj["rows"] if isinstance(obj, dict) else obj
    out_rows = []
    for k, row in enumerate(rows_in):
        where = "grid row %d" % k
        alpha = float(_need(row, "alpha", where))
        p = float(_need(row, "p", where))
        r0 = float(_need(row, "r0", where))
        out_rows.append(oracle_sweep_row(alpha, p, r0))
    path = args.out or "oracle_sweep.csv"
    pio.save_sweep_csv(out_rows, path)
    print("wrote %s (%d rows)" % (path, len(out_rows)))
    return 0


def oracle_sweep_row(alpha: float, p: float, r0: float) -> dict:
    """Classify one (alpha, p, r0) grid point and cross-validate.

    Collision rows integrate the matched data down 30 decades of
    separation and compare against the closed partial time over the
    same range, so rel_err measures integration-vs-closed-form
    agreement with no assumption about the final singular tail; the
    alpha=1 rows report the bound and the integrated first-passage
    time.
    """
    params = ModelParams(alpha=alpha, p=p, d=1, n_particles=2)
    nan = float("nan")
    if p <= alpha + 2.0:
        return {
            "alpha": alpha, "p": p, "r0": r0,
            "tc_closed": nan, "tc_integrated": nan, "rel_err": nan,
            "status": "no-collision",
        }
    if alpha == 1.0:
        tstar = oracle.collision_bound_alpha1(r0, params)
        rd0 = oracle.matched_initial_velocity_alpha1(r0, p)
        st, hit = oracle.integrate_reduced(
            r0, rd0, params, stop_r=1e-6 * r0, t_end=10.0 * tstar, tol=1e-12, atol=1e-30
        )
        return {
            "alpha": alpha, "p": p, "r0": r0,
            "tc_closed": tstar, "tc_integrated": st.t if hit else nan,
            "rel_err": nan, "status": "alpha1-bound",
        }
    tc = oracle.collision_time(r0, params)
    rd0 = oracle.matched_initial_velocity(r0, params)
    r_stop = 1e-30 * r0
    st, hit = oracle.integrate_reduced(
        r0, rd0, params, stop_r=r_stop, t_end=10.0 * tc, tol=1e-12, atol=1e-300
    )
    if hit:
        t_closed_partial = oracle.collision_time_partial(r0, st.r, params)
        rel = abs(st.t - t_closed_partial) / tc
        t_int = st.t + oracle.collision_time(st.r, params)
    else:
        rel, t_int = nan, nan
    return {
        "alpha": alpha, "p": p, "r0": r0,
        "tc_closed": tc, "tc_integrated": t_int, "rel_err": rel,
        "status": "closed-form",
    }


def cmd_dbl(args) -> int:
    mu = pio.load_measure(args.mu)
    nu = pio.load_measure(args.nu)
    res = flat_distance(mu, nu)
    print(_F % res.value)
    if res.approximated:
        print("approximated: support capped, value is a flagged estimate", file=sys.stderr)
    return 0


def cmd_study(args) -> int:
    obj = _load_json(args.config, "study config")
    spec = InitialDataSpec.from_dict(_need(obj, "spec", "study config"))
    params = _params_from(obj, "study config")
    config = _config_from(obj, "study config")
    N_list = [int(n) for n in _need(obj, "N_list", "study config")]
    if len(N_list) < 2:
        raise ConfigError("N_list needs at least two entries to compare")
    T = float(_need(obj, "T", "study config"))
    checkpoints = [float(t) for t in obj.get("checkpoints", [T])]
    h = float(_need(obj, "h", "study config"))
    seeds = [int(s) for s in obj.get("seeds", [0, 1, 2, 3, 4])]
    out_dir = args.out or obj.get("out_dir", "study_out")
    pio.ensure_dir(out_dir)

    report = convergence_study(
        spec, params, N_list, T, checkpoints, h, seeds, config, n_jobs=args.jobs
    )
    _write_study_artifacts(report, out_dir)
    print(json.dumps(report.trend, indent=1))
    return 0 if all(report.trend.values()) else 3


def _write_study_artifacts(report, out_dir: str):
    with open(os.path.join(out_dir, "study_summary.json"), "w") as fh:
        json.dump(report.to_summary(), fh, indent=1)

    def long_csv(name, arr, label, ids):
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", label, "t", "value"])
            for si, seed in enumerate(report.seeds):
                for ki, ident in enumerate(ids):
                    for ci, t in enumerate(report.checkpoints):
                        w.writerow([seed, ident, _F % t, _F % arr[si, ki, ci]])

    pairs = ["%d:%d" % (a, b) for a, b in zip(report.N_list, report.N_list[1:])]
    long_csv("study_dbl_density.csv", report.dbl_density, "pair", pairs)
    long_csv("study_dbl_phase.csv", report.dbl_phase, "pair", pairs)
    long_csv("study_W.csv", report.W, "N", report.N_list)
    long_csv("study_E.csv", report.E, "N", report.N_list)
    long_csv("study_max_cell_mass.csv", report.largest_cell_mass, "N", report.N_list)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="palign",
        description="Singular nonlinear velocity-alignment simulation lab",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    q = sub.add_parser("run", help="integrate one scenario and persist outputs")
    q.add_argument("--config", required=True)
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--out", default=None)
    q.set_defaults(fn=cmd_run)

    q = sub.add_parser("oracle-sweep", help="closed-form vs integrated collision times")
    q.add_argument("--grid", required=True)
    q.add_argument("--out", default=None)
    q.set_defaults(fn=cmd_oracle_sweep)

    q = sub.add_parser("dbl", help="bounded-Lipschitz distance between measure files")
    q.add_argument("mu")
    q.add_argument("nu")
    q.set_defaults(fn=cmd_dbl)

    q = sub.add_parser("study", help="N-doubling mean-field convergence study")
    q.add_argument("--config", required=True)
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--out", default=None)
    q.set_defaults(fn=cmd_study)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    except PalignError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
