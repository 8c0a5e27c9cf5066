"""Command-line entry point.

Subcommands:

* ``run``       simulate one configuration and write profiles.csv,
                pools.csv and summary.json into --out
* ``converge``  run the refinement sweep of the config's converge section
                and write convergence.csv and summary.json
* ``validate``  fast self-checks of the numerical core (no config needed)
* ``presets``   ``presets list`` shows the bundled configurations

Configurations come from --preset NAME or --config PATH, optionally
modified by repeated --override section.key=value flags.  Exit codes:
0 success, 2 configuration error, 3 solver failure, 4 validation failure.

CSV files are written with 17 significant digits, so identical
configurations reproduce them byte for byte.
"""

import argparse
import json
import sys
import time as _time
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import convergence as convergence_mod
from . import fv, kernels, lattice, model, newton, timeloop
from .errors import ConfigError, DomainError, SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4


def _fmt(x):
    return f"{x:.17g}"


def _load_effective_config(args):
    if bool(args.config) == bool(args.preset):
        raise ConfigError("exactly one of --config or --preset is required")
    raw = (config_mod.load_config(args.config) if args.config
           else config_mod.load_preset(args.preset))
    raw = config_mod.apply_overrides(raw, args.override)
    return config_mod.normalize_config(raw)


def _write_profiles(path, record):
    x = record.grid.cell_centers()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,x,u1,u2,u0\n")
        for i, t in enumerate(record.snapshot_times):
            u1 = record.snapshot_u1[i]
            u2 = record.snapshot_u2[i]
            for j in range(x.size):
                fh.write(",".join((
                    _fmt(t), _fmt(x[j]), _fmt(u1[j]), _fmt(u2[j]),
                    _fmt(1.0 - u1[j] - u2[j]))) + "\n")


def _write_pools(path, record):
    cols = (record.times, record.lambda_n, record.lambda_s,
            record.j1_left, record.j1_right, record.j2_left, record.j2_right,
            record.mass, record.free_energy)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,lambda_n,lambda_s,J1_0,J1_1,J2_0,J2_1,"
                 "mass_total,free_energy,newton_iters\n")
        for k in range(record.times.size):
            fh.write(",".join([_fmt(c[k]) for c in cols]
                              + [str(int(record.newton_iters[k]))]) + "\n")


def _write_convergence(path, result):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("level,tau_or_h,error,observed_order\n")
        for row in result.rows:
            order = "" if row.observed_order is None else _fmt(row.observed_order)
            fh.write(f"{row.level},{_fmt(row.tau_or_h)},{_fmt(row.error)},{order}\n")


def _write_summary(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(args):
    cfg = _load_effective_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sim = config_mod.build_simulation(cfg)
    t0 = _time.perf_counter()
    try:
        record = timeloop.run(sim)
    except (SolverError, DomainError) as exc:
        _write_summary(out_dir / "summary.json", {
            "config": cfg,
            "status": "failed",
            "failure": str(exc),
            "wall_time_seconds": _time.perf_counter() - t0,
        })
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    wall = _time.perf_counter() - t0
    _write_profiles(out_dir / "profiles.csv", record)
    _write_pools(out_dir / "pools.csv", record)
    steady = timeloop.steady_state_detect(record)
    drift = float(np.max(np.abs(record.mass - record.mass[0])))
    _write_summary(out_dir / "summary.json", {
        "config": cfg,
        "status": "ok",
        "wall_time_seconds": wall,
        "backend": kernels.backend_name(),
        "n_steps": int(record.times.size - 1),
        "newton_iterations_total": int(record.newton_iters.sum()),
        "conservation": {
            "initial_mass": record.mass[0],
            "final_mass": record.mass[-1],
            "max_drift": drift,
        },
        "final": {
            "lambda_n": record.final_lambda_n,
            "lambda_s": record.final_lambda_s,
            "u1": record.final_u1.tolist(),
            "u2": record.final_u2.tolist(),
        },
        "steady": {
            "is_steady": steady.is_steady,
            "flux": steady.flux,
            "flux_variation": steady.flux_variation,
            "total_flux_max": steady.total_flux_max,
            "threshold": steady.threshold,
            "u1_right": steady.u1_right,
            "u2_left": steady.u2_left,
            "u0_left": steady.u0_left,
            "u0_right": steady.u0_right,
        },
    })
    print(f"{sim.name or 'run'}: {record.times.size - 1} steps to "
          f"t = {record.times[-1]:g} in {wall:.2f} s "
          f"({kernels.backend_name()} backend), mass drift {drift:.2e}")
    return EXIT_OK


def cmd_converge(args):
    cfg = _load_effective_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = _time.perf_counter()
    try:
        result = convergence_mod.converge(cfg, progress=lambda m: print(f"  {m}"))
    except (SolverError, DomainError) as exc:
        _write_summary(out_dir / "summary.json", {
            "config": cfg,
            "status": "failed",
            "failure": str(exc),
            "wall_time_seconds": _time.perf_counter() - t0,
        })
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    wall = _time.perf_counter() - t0
    _write_convergence(out_dir / "convergence.csv", result)
    _write_summary(out_dir / "summary.json", {
        "config": cfg,
        "status": "ok",
        "wall_time_seconds": wall,
        "backend": kernels.backend_name(),
        "mode": result.mode,
        "reference": result.ref_tau_or_h,
        "levels": [{"level": r.level, "tau_or_h": r.tau_or_h, "error": r.error,
                    "observed_order": r.observed_order} for r in result.rows],
    })
    for row in result.rows:
        order = "-" if row.observed_order is None else f"{row.observed_order:.3f}"
        print(f"level {row.level}: {result.mode} step {row.tau_or_h:.6g} "
              f"error {row.error:.6e} order {order}")
    return EXIT_OK


def _validation_checks(seed=20240817):
    rng = np.random.default_rng(seed)
    params = model.ModelParameters(
        alpha1=0.2666, alpha2=0.2666, beta1=3.0, beta2=3.0,
        D1=4e-4, D2=4e-3, lambda_n_max=0.0029, lambda_s_max=0.175,
        V1=model.Potential.linear(1.75), V2=model.Potential.linear(-1.5))

    def random_state(m):
        u1 = rng.uniform(0.02, 0.45, m)
        u2 = rng.uniform(0.02, 0.45, m)
        ln = rng.uniform(0.1, 0.9) * params.lambda_n_max
        ls = rng.uniform(0.1, 0.9) * params.lambda_s_max
        return fv.pack(u1, u2, ln, ls)

    def check_coercivity():
        worst = 0.0
        for _ in range(1000):
            u1, u2 = rng.uniform(0.01, 0.49, 2)
            z1, z2 = rng.normal(size=2)
            lhs, rhs = model.quadratic_form_sides(u1, u2, z1, z2, params)
            scale = max(abs(lhs), abs(rhs), 1e-300)
            worst = max(worst, abs(lhs - rhs) / scale)
        return worst <= 1e-12, f"max relative gap {worst:.2e}"

    def check_jacobian():
        grid = fv.Grid(8)
        tau = 1e-3
        worst = 0.0
        for _ in range(3):
            y = random_state(grid.m)
            jac = fv.assemble_jacobian(y, params, grid, tau).to_dense()
            fd = np.empty_like(jac)
            eps = 1e-7
            for j in range(y.size):
                yp = y.copy()
                ym = y.copy()
                yp[j] += eps
                ym[j] -= eps
                fd[:, j] = (fv.assemble_residual(yp, y, params, grid, tau)
                            - fv.assemble_residual(ym, y, params, grid, tau)) / (2 * eps)
            worst = max(worst, np.max(np.abs(jac - fd)) / max(1.0, np.max(np.abs(jac))))
        return worst <= 1e-6, f"max relative entry error {worst:.2e}"

    def check_telescoping():
        grid = fv.Grid(16)
        worst = 0.0
        for _ in range(10):
            y_new = random_state(grid.m)
            y_old = random_state(grid.m)
            res = fv.assemble_residual(y_new, y_old, params, grid, 5e-4)
            m = grid.m
            weighted = grid.h * res[: 2 * m].sum() + res[2 * m:].sum()
            dm = (timeloop.conserved_total(y_new, grid)
                  - timeloop.conserved_total(y_old, grid))
            worst = max(worst, abs(weighted - dm))
        return worst <= 1e-14, f"max telescoping defect {worst:.2e}"

    def check_entropy_round_trip():
        worst = 0.0
        for _ in range(100):
            u1 = rng.uniform(1e-6, 0.98)
            u2 = rng.uniform(1e-6, 0.999 - u1)
            w1, w2 = model.entropy_variables(u1, u2)
            v1, v2 = model.inverse_entropy_variables(w1, w2)
            worst = max(worst, abs(v1 - u1), abs(v2 - u2))
        return worst <= 1e-12, f"max round-trip error {worst:.2e}"

    def check_lattice_conservation():
        m = 24
        h = 1.0 / m
        state = lattice.LatticeState.from_continuum(
            params, rng.uniform(0.05, 0.4, m), rng.uniform(0.05, 0.4, m),
            0.4 * params.lambda_n_max, 0.6 * params.lambda_s_max)
        du1, du2, dln, dls = lattice.lattice_rhs(
            state, h, (params.V1, params.V2))
        defect = abs(h * (du1.sum() + du2.sum()) + dln + dls)
        return defect <= 1e-14, f"rhs mass defect {defect:.2e}"

    def check_step_conservation():
        grid = fv.Grid(32)
        y = fv.pack(np.full(32, 0.1), np.full(32, 0.1), 0.0015, 0.12)
        ncfg = newton.NewtonConfig(tol=1e-10, max_iter=150)
        y1, _ = newton.solve_implicit_step(y, 1e-3, params, grid, ncfg)
        drift = abs(timeloop.conserved_total(y1, grid)
                    - timeloop.conserved_total(y, grid))
        return drift <= 1e-9, f"one-step mass drift {drift:.2e}"

    return [
        ("coercivity identity", check_coercivity),
        ("jacobian vs finite differences", check_jacobian),
        ("residual mass telescoping", check_telescoping),
        ("entropy variable round trip", check_entropy_round_trip),
        ("lattice rhs conservation", check_lattice_conservation),
        ("implicit step conservation", check_step_conservation),
    ]


def cmd_validate(_args):
    failures = 0
    for name, fn in _validation_checks():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1
    if failures:
        print(f"{failures} validation check(s) failed", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_presets(args):
    if args.action != "list":
        raise ConfigError(f"unknown presets action {args.action!r}")
    for name, description in config_mod.list_presets():
        print(f"{name:18s} {description}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="vesicleflow",
        description="Finite-volume simulator for two-species cross-diffusion "
                    "transport between axonal reservoirs")
    sub = p.add_subparsers(dest="command", required=True)

    def add_config_flags(sp, needs_out=True):
        sp.add_argument("--config", help="path to a YAML configuration")
        sp.add_argument("--preset", help="name of a bundled configuration")
        sp.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="dot-path config override, repeatable")
        if needs_out:
            sp.add_argument("--out", required=True,
                            help="output directory (created if missing)")

    add_config_flags(sub.add_parser("run", help="simulate one configuration"))
    add_config_flags(sub.add_parser("converge",
                                    help="run a refinement study"))
    sub.add_parser("validate", help="fast numerical self-checks")
    pp = sub.add_parser("presets", help="inspect bundled configurations")
    pp.add_argument("action", choices=["list"])
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "converge": cmd_converge,
               "validate": cmd_validate, "presets": cmd_presets}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, DomainError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
