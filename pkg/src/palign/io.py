"""Persistence: trajectory CSV + JSON sidecar, diagnostics CSV,
atomic-measure CSV, oracle sweep CSV.

All floating-point values are written with 17 significant digits so a
write/read round trip reproduces every double bit-for-bit.  Formats
carry a ``format_version`` field in their JSON sidecars.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .diagnostics import DiagnosticsRecord
from .integrator import IntegratorConfig, Trajectory, TrajectoryEvent, TrajectorySample
from .measures import AtomicMeasure
from .model import ModelParams, ParticleState

FORMAT_VERSION = 1


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


# ----------------------------------------------------------------------
# trajectory
# ----------------------------------------------------------------------

def save_trajectory(traj: Trajectory, basepath: str) -> tuple[str, str]:
    """Write <base>.csv (one row per particle per sample) and
    <base>.json (params, config, events, per-sample diagnostics)."""
    d = traj.params.d
    csv_path = basepath + ".csv"
    json_path = basepath + ".json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["t", "i"]
            + [f"x_{a}" for a in range(d)]
            + [f"v_{a}" for a in range(d)]
        )
        for s in traj.steps:
            st = s.state
            for i in range(st.n):
                w.writerow(
                    [_fmt(st.t), i]
                    + [_fmt(c) for c in st.x[i]]
                    + [_fmt(c) for c in st.v[i]]
                )
    sidecar = {
        "format_version": FORMAT_VERSION,
        "params": traj.params.to_dict(),
        "config": traj.config.to_dict(),
        "events": [{"t": e.t, "kind": e.kind} for e in traj.events],
        "samples": [
            {
                "t": s.state.t,
                "accepted_dt": s.accepted_dt,
                "error_estimate": s.error_estimate,
                "diagnostics": None if s.diagnostics is None else s.diagnostics.to_dict(),
            }
            for s in traj.steps
        ],
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=1)
    return csv_path, json_path


def load_trajectory(basepath: str) -> Trajectory:
    """Rebuild a Trajectory from <base>.csv + <base>.json."""
    with open(basepath + ".json") as fh:
        sidecar = json.load(fh)
    if sidecar.get("format_version") != FORMAT_VERSION:
        raise ValueError("unsupported trajectory format_version")
    params = ModelParams.from_dict(sidecar["params"])
    config = IntegratorConfig.from_dict(sidecar["config"])
    d = params.d
    rows_by_t: dict[str, list] = {}
    order: list[str] = []
    with open(basepath + ".csv", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[: 2 + 2 * d] != (
            ["t", "i"] + [f"x_{a}" for a in range(d)] + [f"v_{a}" for a in range(d)]
        ):
            raise ValueError("unexpected trajectory CSV header")
        for row in r:
            key = row[0]
            if key not in rows_by_t:
                rows_by_t[key] = []
                order.append(key)
            rows_by_t[key].append(row)
    traj = Trajectory(params=params, config=config)
    for key, meta in zip(order, sidecar["samples"]):
        rows = rows_by_t[key]
        rows.sort(key=lambda row: int(row[1]))
        x = np.array([[float(c) for c in row[2 : 2 + d]] for row in rows])
        v = np.array([[float(c) for c in row[2 + d : 2 + 2 * d]] for row in rows])
        state = ParticleState(float(key), x, v)
        diag = (
            DiagnosticsRecord.from_dict(meta["diagnostics"])
            if meta.get("diagnostics")
            else None
        )
        traj.steps.append(
            TrajectorySample(state, meta["accepted_dt"], meta["error_estimate"], diag)
        )
    traj.events = [TrajectoryEvent(e["t"], e["kind"]) for e in sidecar["events"]]
    return traj


def save_diagnostics_csv(traj: Trajectory, path: str) -> str:
    """Standalone diagnostics series: t,E,Dp,Dalpha,px..,Vmax,Xmax,dmin."""
    d = traj.params.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["t", "E", "Dp", "Dalpha"]
            + [f"p{a}" for a in range(d)]
            + ["Vmax", "Xmax", "dmin"]
        )
        for s in traj.steps:
            g = s.diagnostics
            if g is None:
                continue
            w.writerow(
                [_fmt(g.t), _fmt(g.energy_E), _fmt(g.dissipation_Dp), _fmt(g.dissipation_Dalpha)]
                + [_fmt(c) for c in g.mean_velocity]
                + [_fmt(g.max_speed), _fmt(g.max_position), _fmt(g.min_pair_dist)]
            )
    return path


# ----------------------------------------------------------------------
# atomic measures
# ----------------------------------------------------------------------

def save_measure(mu: AtomicMeasure, basepath: str) -> tuple[str, str]:
    """Write <base>.csv rows ``w,z_0..z_{k-1}`` and a JSON sidecar."""
    csv_path = basepath + ".csv"
    json_path = basepath + ".json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["w"] + [f"z_{a}" for a in range(mu.k)])
        for weight, row in zip(mu.weights, mu.points):
            w.writerow([_fmt(weight)] + [_fmt(c) for c in row])
    with open(json_path, "w") as fh:
        json.dump(
            {
                "format_version": FORMAT_VERSION,
                "dimension": mu.k,
                "n_atoms": mu.n,
                "mass": mu.mass,
            },
            fh,
            indent=1,
        )
    return csv_path, json_path


def load_measure(path: str) -> AtomicMeasure:
    """Read a measure from its CSV (sidecar optional)."""
    base = path[:-4] if path.endswith(".csv") else path
    with open(base + ".csv", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[0] != "w":
            raise ValueError("unexpected measure CSV header")
        ws, pts = [], []
        for row in r:
            ws.append(float(row[0]))
            pts.append([float(c) for c in row[1:]])
    return AtomicMeasure(np.array(pts), np.array(ws))


# ----------------------------------------------------------------------
# oracle sweep
# ----------------------------------------------------------------------

SWEEP_HEADER = ["alpha", "p", "r0", "tc_closed", "tc_integrated", "rel_err", "status"]


def save_sweep_csv(rows: list[dict], path: str) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for row in rows:
            w.writerow(
                [
                    _fmt(row["alpha"]),
                    _fmt(row["p"]),
                    _fmt(row["r0"]),
                    _fmt(row["tc_closed"]),
                    _fmt(row["tc_integrated"]),
                    _fmt(row["rel_err"]),
                    row["status"],
                ]
            )
    return path


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
