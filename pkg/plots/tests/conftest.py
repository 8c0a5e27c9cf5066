"""Real CSV inputs for the figure tests, produced through the solver CLI.

The solver is driven strictly through its command line, so these tests
exercise only the documented file interface between the two packages.
"""

import subprocess
import sys

import pytest

TINY_RUN = """\
schema: 1
name: plots-tiny
params:
  alpha1: 0.2666
  alpha2: 0.2666
  beta1: 3.0
  beta2: 3.0
  D1: 4.0e-4
  D2: 4.0e-3
  lambda_n_max: 2.9e-3
  lambda_s_max: 0.175
  V1: 1.75
  V2: -1.5
grid: {m: 8}
time: {tau: 1.0e-3, t_end: 5.0e-3}
initial: {kind: uniform, u1: 0.1, u2: 0.1, lambda_n: 1.5e-3, lambda_s: 0.12}
newton: {tol: 1.0e-10, max_iter: 400}
output: {every: 1}
"""

TINY_SWEEP = TINY_RUN.replace(
    "output: {every: 1}",
    "output: {every: 1}\n"
    "converge: {mode: time, levels: 2, base_tau: 4.0e-3, ref_tau: 2.5e-4}"
).replace("t_end: 5.0e-3", "t_end: 8.0e-3").replace(
    "tol: 1.0e-10", "tol: 1.0e-11").replace("max_iter: 400", "max_iter: 600")


def _solver(args, cwd):
    proc = subprocess.run([sys.executable, "-m", "vesicleflow.cli"] + args,
                          capture_output=True, text=True, cwd=cwd,
                          timeout=300)
    if proc.returncode != 0:
        raise RuntimeError(f"solver CLI failed:\n{proc.stderr}")


@pytest.fixture(scope="session")
def solver_outputs(tmp_path_factory):
    """Directory holding profiles.csv, pools.csv and convergence.csv."""
    root = tmp_path_factory.mktemp("solver-out")
    cfg = root / "run.yaml"
    cfg.write_text(TINY_RUN, encoding="utf-8")
    _solver(["run", "--config", str(cfg), "--out", str(root / "run")], root)
    sweep = root / "sweep.yaml"
    sweep.write_text(TINY_SWEEP, encoding="utf-8")
    _solver(["converge", "--config", str(sweep),
             "--out", str(root / "sweep")], root)
    return {
        "profiles": root / "run" / "profiles.csv",
        "pools": root / "run" / "pools.csv",
        "convergence": root / "sweep" / "convergence.csv",
    }
