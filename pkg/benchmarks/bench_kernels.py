#!/usr/bin/env python3
"""Time the numba and numpy kernel paths on the same mesh and state.

    python benchmarks/bench_kernels.py --K1D 4 --N 3 --runs 5 [--json out.json]

Each kernel is warmed up once (numba compiles on first call), then timed as
the median of ``--runs`` calls. Outputs from both paths are compared so a
speedup is never reported for a wrong answer.
"""

import argparse
import json
import statistics
import time

import numpy as np

from pyramid_dg import dg, kernels
from pyramid_dg._accel import HAVE_NUMBA
from pyramid_dg.mesh import build_mesh


def time_call(fn, runs):
    fn()
    ts = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts)


def kernel_calls(ctx, numba):
    """name -> (zero-arg callable, output arrays) for one backend."""
    rng = np.random.default_rng(0)
    K, Np, ops = ctx.K, ctx.Np, ctx.ops
    q = rng.standard_normal((4, K, Np))
    traces = np.ascontiguousarray(q @ ops.Vf.T)
    bq, bn = dg._beta_fields(ctx, (1.0, 0.3, -0.2))
    tau_p, tau_u = dg._wave_taus(ctx, dg.WaveMaterial(), 1.0)
    g = lambda name: kernels.get(name, numba)
    o1, o2 = np.empty((K, Np)), np.empty((3, K, Np))
    o3 = np.empty((K, Np))
    res, qq, tr = np.zeros_like(q), q.copy(), np.empty_like(traces)
    return {
        "volume_advection": (lambda: g("volume_advection")(q[0], ops.Dr, ops.Ds, ops.Dt, ops.V, ctx.metric,
                                                            ctx.wJ, bq, o3), [o3]),
        "volume_wave": (lambda: g("volume_wave")(q[0], q[1:], ops.Dr, ops.Ds, ops.Dt, ops.V, ctx.metric,
                                                  ctx.wJ, o1, o2), [o1, o2]),
        "surface_advection": (lambda: g("surface_advection")(traces[0], ctx.mapP, bn, 1.0, ops.Vf, ctx.wsJ, o3),
                              [o3]),
        "surface_wave": (lambda: g("surface_wave")(traces[0], traces[1:], ctx.mapP, ctx.bc, ctx.normals,
                                                    tau_p, tau_u, ops.Vf, ctx.wsJ, o1, o2), [o1, o2]),
        # res and qq evolve across calls; only timing matters here
        "rk_update": (lambda: g("rk_update")(qq, res, q, 0.5, 0.1, 1e-6, ops.Vf, tr), None),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--K1D", type=int, default=4)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--json", help="also write results here")
    args = p.parse_args(argv)

    ctx = dg.DGContext.build(build_mesh(args.K1D, args.N, seed=0), args.N)
    print(f"K1D={args.K1D} N={args.N} K={ctx.K} Np={ctx.Np} numba available: {HAVE_NUMBA}")
    backends = [False, True] if HAVE_NUMBA else [False]
    calls = {b: kernel_calls(ctx, b) for b in backends}
    results = []
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name in calls[False]:
        row = {"kernel": name}
        for b in backends:
            row["numba" if b else "numpy"] = time_call(calls[b][name][0], args.runs)
        diff = float("nan")
        if HAVE_NUMBA and calls[False][name][1] is not None:
            calls[False][name][0]()
            calls[True][name][0]()
            diff = max(float(np.abs(a - b).max()) for a, b in zip(calls[False][name][1], calls[True][name][1]))
        row["max_diff"] = diff
        results.append(row)
        nb = row.get("numba", float("nan"))
        print(f"{name:<20}{1e3 * row['numpy']:>12.3f}{1e3 * nb:>12.3f}{row['numpy'] / nb:>10.2f}{diff:>12.2e}")

    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"K1D": args.K1D, "N": args.N, "K": ctx.K, "results": results}, fh, indent=2)


if __name__ == "__main__":
    main()
