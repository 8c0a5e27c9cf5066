"""Damped Newton iteration for the implicit time steps.

The update is y_{r+1} = y_r + lambda_r delta_r with J(y_r) delta_r =
-F(y_r) and a sublinearly decaying damping factor built from
(r+1)^(-exponent).  Two damping modes are available:

* ``capped_increment`` (default): lambda_r = (r+1)^(-exponent) when
  ||delta_r||_inf <= 1, otherwise (r+1)^(-exponent)/||delta_r||_inf, so
  near the solution the step degenerates to a plain damped Newton step
  and convergence to arbitrary tolerances is possible.
* ``normalized_increment``: lambda_r = (r+1)^(-exponent)/||delta_r||_inf
  always.  The increment then has sup-norm exactly (r+1)^(-exponent),
  which is robust far from the solution but cannot settle below the
  forced step length; use it for diagnostics, not tight tolerances.

Iteration stops at the first iterate with ||F||_inf < tol.
"""

from dataclasses import dataclass, field

import numpy as np

from . import fv, kernels
from .errors import LinearSolverError, NewtonError

__all__ = ["NewtonConfig", "NewtonReport", "damping_factor", "newton_solve",
           "solve_implicit_step"]

_MODES = ("capped_increment", "normalized_increment")


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-3
    max_iter: int = 50
    damping_exponent: float = 0.75
    mode: str = "capped_increment"

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if not 0 <= self.damping_exponent < 1:
            raise ValueError("damping_exponent must lie in [0, 1)")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")


@dataclass
class NewtonReport:
    """Per-solve record: counts, final norm, and the iteration history."""
    iterations: int
    final_residual_norm: float
    converged: bool
    residual_norms: np.ndarray = field(default_factory=lambda: np.empty(0))
    update_norms: np.ndarray = field(default_factory=lambda: np.empty(0))
    lambdas: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def step_norms(self):
        """Infinity norms of the accepted update per iteration."""
        return self.update_norms


def damping_factor(r, update_norm, exponent=0.75, mode="capped_increment"):
    """Damping factor lambda_r for iteration r (0-based)."""
    base = (r + 1.0) ** (-exponent)
    if mode == "capped_increment":
        return base if update_norm <= 1.0 else base / update_norm
    if mode == "normalized_increment":
        return base if update_norm == 0.0 else base / update_norm
    raise ValueError(f"mode must be one of {_MODES}")


def newton_solve(residual_fn, jacobian_fn, y0, config):
    """Generic damped Newton driver.

    `jacobian_fn(y)` may return a dense matrix or any object with a
    ``solve(rhs)`` method.  Returns (y, NewtonReport); raises NewtonError
    (report attached) when the iteration budget runs out, and propagates
    LinearSolverError from singular systems.
    """
    y = np.array(y0, dtype=float)
    res_norms = []
    upd_norms = []
    lams = []
    for it in range(config.max_iter + 1):
        f = np.asarray(residual_fn(y), dtype=float)
        nrm = float(np.max(np.abs(f))) if f.size else 0.0
        res_norms.append(nrm)
        if not np.isfinite(nrm):
            raise NewtonError(
                f"non-finite residual at iteration {it}",
                report=_report(False, len(lams), nrm, res_norms, upd_norms, lams))
        if nrm < config.tol:
            return y, _report(True, len(lams), nrm, res_norms, upd_norms, lams)
        if it == config.max_iter:
            raise NewtonError(
                f"no convergence within {config.max_iter} iterations "
                f"(residual {nrm:.3e}, tol {config.tol:.1e})",
                report=_report(False, len(lams), nrm, res_norms, upd_norms, lams))
        jac = jacobian_fn(y)
        if hasattr(jac, "solve"):
            delta = jac.solve(-f)
        else:
            try:
                delta = np.linalg.solve(jac, -f)
            except np.linalg.LinAlgError as exc:
                raise LinearSolverError(f"singular Jacobian: {exc}") from exc
        nd = float(np.max(np.abs(delta)))
        lam = damping_factor(it, nd, config.damping_exponent, config.mode)
        upd_norms.append(lam * nd)
        lams.append(lam)
        y += lam * delta
    raise AssertionError("unreachable")


def _report(converged, iters, nrm, res_norms, upd_norms, lams):
    return NewtonReport(
        iterations=iters,
        final_residual_norm=nrm,
        converged=converged,
        residual_norms=np.asarray(res_norms),
        update_norms=np.asarray(upd_norms),
        lambdas=np.asarray(lams),
    )


def solve_implicit_step(y_old, tau, params, grid, config, slopes=None,
                        y_guess=None):
    """One implicit Euler step: solve R(y_new; y_old, tau) = 0.

    Dispatches to the compiled Newton kernel when the numba backend is
    active, otherwise runs the generic driver on the numpy assembly.
    `slopes` optionally carries the precomputed (V1', V2') face arrays so
    the per-step call avoids regenerating them.
    """
    if slopes is None:
        slopes = (params.V1.slope_at_faces(grid), params.V2.slope_at_faces(grid))
    g1f, g2f = slopes
    y0 = np.array(y_old if y_guess is None else y_guess, dtype=float)
    if kernels.NUMBA_ENABLED:
        mode = 0 if config.mode == "capped_increment" else 1
        res_norms = np.empty(config.max_iter + 1)
        upd_norms = np.empty(config.max_iter)
        lams = np.empty(config.max_iter)
        iters, nrm, status = kernels.newton_step_kernel(
            y0, np.asarray(y_old, dtype=float), grid.h, tau, *params.flat(),
            g1f, g2f, config.tol, config.max_iter, config.damping_exponent,
            mode, res_norms, upd_norms, lams)
        report = NewtonReport(
            iterations=int(iters),
            final_residual_norm=float(nrm),
            converged=status == 0,
            residual_norms=res_norms[: min(iters + 1, config.max_iter + 1)].copy(),
            update_norms=upd_norms[:iters].copy(),
            lambdas=lams[:iters].copy(),
        )
        if status == 0:
            return y0, report
        if status == 2:
            raise LinearSolverError("singular linear system in Newton step")
        raise NewtonError(
            f"no convergence within {config.max_iter} iterations "
            f"(residual {nrm:.3e}, tol {config.tol:.1e})",
            report=report)
    y_old_arr = np.asarray(y_old, dtype=float)
    return newton_solve(
        lambda y: fv.assemble_residual(y, y_old_arr, params, grid, tau),
        lambda y: fv.assemble_jacobian(y, params, grid, tau),
        y0, config)
