"""Benchmark: compiled kernel core vs pure-numpy fallback.

Times the three O(N^2) kernels and one full integrator run on both
backends.  Run from the repository root:

    python benchmarks/bench_kernels.py [--sizes 64 256 1024]
"""

import argparse
import time

import numpy as np

from palign import IntegratorConfig, ModelParams, ParticleState, backend, run
from palign import _kernels as pyk


def _time(fn, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(sizes):
    rng = np.random.default_rng(0)
    print("%-22s %8s %12s %12s %8s" % ("kernel", "N", "compiled", "numpy", "speedup"))
    for n in sizes:
        x = np.ascontiguousarray(rng.uniform(0, 1, (n, 2)))
        v = np.ascontiguousarray(rng.uniform(-1, 1, (n, 2)))
        cases = {
            "force_pair_sum": (
                lambda: backend.force_pair_sum(x, v, 1.0, 3.0, 0.0),
                lambda: pyk.force_pair_sum(x, v, 1.0, 3.0, 0.0),
            ),
            "dissipation_sum": (
                lambda: backend.dissipation_sum(x, v, 1.0, 3.0),
                lambda: pyk.dissipation_sum(x, v, 1.0, 3.0, 0.0),
            ),
            "pair_stats": (
                lambda: backend.pair_stats(x, v),
                lambda: pyk.pair_stats(x, v),
            ),
        }
        for name, (fast, slow) in cases.items():
            tc = _time(fast)
            tp = _time(slow)
            print(
                "%-22s %8d %10.3fms %10.3fms %7.1fx"
                % (name, n, 1e3 * tc, 1e3 * tp, tp / tc)
            )


def bench_run(n=128):
    rng = np.random.default_rng(1)
    params = ModelParams(alpha=1.0, p=3.0, d=2, n_particles=n)
    cfg = IntegratorConfig(
        rel_tol=1e-8, abs_tol=1e-8, dt_init=1e-3, dt_max=0.02, dt_min=1e-14, kappa=0.5
    )
    s = ParticleState(0.0, rng.uniform(0, 1, (n, 2)), rng.uniform(-0.3, 0.3, (n, 2)))
    t0 = time.perf_counter()
    traj = run(s, params, cfg, t_end=1.0, observer_stride=50)
    el = time.perf_counter() - t0
    print(
        "\nfull run: N=%d to T=1 on the '%s' backend: %.2fs (%d samples)"
        % (n, backend.BACKEND, el, len(traj.steps))
    )
    print("set PALIGN_FORCE_PYTHON=1 to rerun on the numpy fallback")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 1024])
    args = ap.parse_args()
    print("active backend:", backend.BACKEND)
    bench_kernels(args.sizes)
    bench_run()
