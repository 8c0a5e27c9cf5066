"""Time-stepping throughput of the compiled kernels vs the numpy assembly.

Marches the same implicit-Euler workload through both backends by toggling
the dispatch flag, so each lane runs exactly the code path the package
selects via VESICLEFLOW_NUMBA.  The compiled lane is skipped when numba
was unavailable or disabled at import (the kernels are then plain Python
loops, which would not be a meaningful timing).

Usage:
    python3 benchmarks/benchmark_kernels.py --sizes 100,400,1600 --steps 50
    python3 benchmarks/benchmark_kernels.py --json results.json
"""

import argparse
import json
import time

import numpy as np

from vesicleflow import fv, kernels, model, newton, timeloop


def _table1_params():
    return model.ModelParameters(
        alpha1=0.2666, alpha2=0.2666, beta1=3.0, beta2=3.0,
        D1=4e-4, D2=4e-3, lambda_n_max=0.0029, lambda_s_max=0.175,
        V1=model.Potential.linear(1.75), V2=model.Potential.linear(-1.5))


def march(m, steps, tau, tol):
    """March `steps` implicit steps on the active backend; returns timing."""
    params = _table1_params()
    grid = fv.Grid(m)
    slopes = (params.V1.slope_at_faces(grid), params.V2.slope_at_faces(grid))
    ncfg = newton.NewtonConfig(tol=tol, max_iter=400)
    y = fv.pack(np.full(m, 0.1), np.full(m, 0.1), 1.5e-3, 0.12)
    # untimed first step covers the cold Newton transient and any caching
    y, _ = newton.solve_implicit_step(y, tau, params, grid, ncfg, slopes)
    iters = 0
    t0 = time.perf_counter()
    for _ in range(steps):
        y_new, report = newton.solve_implicit_step(y, tau, params, grid,
                                                   ncfg, slopes)
        iters += report.iterations
        y = y_new
    wall = time.perf_counter() - t0
    return wall, iters, float(timeloop.conserved_total(y, grid))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,400,1600",
                    help="comma-separated cell counts")
    ap.add_argument("--steps", type=int, default=50,
                    help="timed steps per size and backend")
    ap.add_argument("--tau", type=float, default=1e-3)
    ap.add_argument("--tol", type=float, default=1e-8,
                    help="Newton tolerance for every step")
    ap.add_argument("--json", help="also write results to this path")
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]

    compiled = hasattr(kernels.newton_step_kernel, "py_func")
    if compiled:
        kernels.warmup()
    else:
        print("numba lane unavailable (not installed or disabled at import); "
              "timing the numpy lane only")

    saved = kernels.NUMBA_ENABLED
    results = []
    print(f"{'m':>6} {'lane':>6} {'ms/step':>9} {'newton iters':>13}")
    try:
        for m in sizes:
            row = {"m": m, "steps": args.steps, "tau": args.tau}
            lanes = (("numba", True), ("numpy", False)) if compiled \
                else (("numpy", False),)
            for lane, flag in lanes:
                kernels.NUMBA_ENABLED = flag
                wall, iters, mass = march(m, args.steps, args.tau, args.tol)
                per_step = 1e3 * wall / args.steps
                row[f"{lane}_ms_per_step"] = per_step
                row[f"{lane}_newton_iters"] = iters
                print(f"{m:>6} {lane:>6} {per_step:>9.3f} {iters:>13}")
            if compiled:
                row["speedup"] = (row["numpy_ms_per_step"]
                                  / row["numba_ms_per_step"])
                print(f"{'':>6} {'':>6} speedup {row['speedup']:>5.1f}x")
            results.append(row)
    finally:
        kernels.NUMBA_ENABLED = saved

    if args.json:
        payload = {"compiled_lane": compiled, "results": results}
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.json}")


if __name__ == "__main__":
    main()
