"""Damped Newton solver: damping schedule, both damping modes, failure
paths, and the per-step driver with its opening-step regression pin."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vesicleflow import fv, newton
from vesicleflow.errors import LinearSolverError, NewtonError

from conftest import desk_config, table1_params

# one implicit step of the desk-scale uniform start at tight tolerance;
# measured once on both backends, pinned with a small band for BLAS drift
OPENING_STEP_ITERS = 158


def affine_problem(shift=0.0):
    A = np.array([[2.0, 1.0], [0.0, 3.0]])
    c = np.array([1.0, -2.0]) + shift

    def residual(y):
        return A @ y - c

    def jacobian(_y):
        return A

    return residual, jacobian, np.linalg.solve(A, c)


# ---------------------------------------------------------------- damping

def test_damping_schedule_values():
    assert newton.damping_factor(0, 0.5) == 1.0
    assert math.isclose(newton.damping_factor(1, 0.5), 2.0 ** -0.75,
                        rel_tol=1e-15)
    assert math.isclose(newton.damping_factor(3, 0.5), 4.0 ** -0.75,
                        rel_tol=1e-15)
    assert math.isclose(newton.damping_factor(1, 0.5), 0.594604, abs_tol=1e-6)
    assert math.isclose(newton.damping_factor(3, 0.5), 0.353553, abs_tol=1e-6)


def test_damping_caps_large_steps():
    # capped mode only divides when the increment exceeds unit norm
    assert newton.damping_factor(0, 4.0) == 0.25
    assert newton.damping_factor(0, 0.25) == 1.0
    # normalized mode always divides
    assert newton.damping_factor(0, 0.25, mode="normalized_increment") == 4.0
    assert math.isclose(
        newton.damping_factor(1, 4.0, mode="normalized_increment"),
        2.0 ** -0.75 / 4.0, rel_tol=1e-15)


def test_newton_config_validation():
    with pytest.raises(ValueError):
        newton.NewtonConfig(tol=0.0)
    with pytest.raises(ValueError):
        newton.NewtonConfig(max_iter=0)
    with pytest.raises(ValueError):
        newton.NewtonConfig(mode="nonsense")
    with pytest.raises(ValueError):
        newton.NewtonConfig(damping_exponent=1.0)


# ------------------------------------------------------------ generic solve

def test_affine_first_step_exact():
    """lambda_0 = 1, so a small-increment affine problem lands on the
    solution in a single update."""
    residual, jacobian, exact = affine_problem()
    y, report = newton.newton_solve(residual, jacobian, exact + 0.01,
                                    newton.NewtonConfig(tol=1e-12))
    assert report.converged
    assert report.iterations == 1
    assert_allclose(y, exact, rtol=0, atol=1e-14)


def test_affine_converges_from_away():
    """From distance 2 the step cap engages on iteration 0 and the
    sublinear damped tail does the rest; the budget must honor the
    schedule's fourth-power growth in -log(tol)."""
    residual, jacobian, exact = affine_problem()
    y0 = exact + 2.0
    y, report = newton.newton_solve(residual, jacobian, y0,
                                    newton.NewtonConfig(tol=1e-10,
                                                        max_iter=4000))
    assert report.converged
    assert_allclose(y, exact, rtol=0, atol=1e-9)
    assert report.final_residual_norm < 1e-10
    # damping engaged: at least one non-unit factor
    assert np.min(report.lambdas) < 1.0


def test_normalized_mode_converges_on_affine():
    residual, jacobian, exact = affine_problem()
    cfg = newton.NewtonConfig(tol=1e-10, max_iter=500,
                              mode="normalized_increment")
    y, report = newton.newton_solve(residual, jacobian, exact + 0.5, cfg)
    assert report.converged
    assert_allclose(y, exact, rtol=0, atol=1e-9)


def test_singular_jacobian_raises():
    def residual(y):
        return np.array([y[0] + y[1], y[0] + y[1]])

    def jacobian(_y):
        return np.array([[1.0, 1.0], [1.0, 1.0]])

    with pytest.raises(LinearSolverError):
        newton.newton_solve(residual, jacobian, np.array([1.0, 1.0]),
                            newton.NewtonConfig(tol=1e-12))


def test_budget_exhaustion_carries_report():
    # residual floor at 1: never converges, must fail loudly with history
    def residual(y):
        return np.array([1.0 + y[0] ** 2])

    def jacobian(y):
        return np.array([[max(2.0 * y[0], 0.1)]])

    with pytest.raises(NewtonError) as info:
        newton.newton_solve(residual, jacobian, np.array([1.0]),
                            newton.NewtonConfig(tol=1e-8, max_iter=7))
    report = info.value.report
    assert report is not None
    assert not report.converged
    assert report.iterations == 7
    assert report.residual_norms.size == 8
    assert report.step_norms.size == 7
    assert report.lambdas.size == 7


def test_report_reflects_convergence():
    residual, jacobian, exact = affine_problem()
    _, report = newton.newton_solve(residual, jacobian, exact + 0.01,
                                    newton.NewtonConfig(tol=1e-12))
    assert report.converged and report.final_residual_norm < 1e-12
    assert report.residual_norms[-1] == report.final_residual_norm
    # step_norms aliases the accepted update norms
    assert report.step_norms is report.update_norms


# ------------------------------------------------------------- step driver

def test_opening_step_iteration_pin():
    """Iteration count of the first implicit step of the desk-scale run.

    The damped schedule makes this count a sharp, deterministic fingerprint
    of residual, Jacobian, linear solve and damping together; a +-2 band
    absorbs BLAS-level rounding differences across platforms.
    """
    cfg = desk_config()
    u1, u2 = cfg.initial.cell_averages(cfg.grid)
    y0 = fv.pack(u1, u2, cfg.initial.lambda_n, cfg.initial.lambda_s)
    y1, report = newton.solve_implicit_step(y0, cfg.tau, cfg.params,
                                            cfg.grid, cfg.newton)
    assert report.converged
    assert report.final_residual_norm < 1e-10
    assert abs(report.iterations - OPENING_STEP_ITERS) <= 2
    fv.validate_state(y1, cfg.params, slack=1e-12)


def test_step_driver_deterministic():
    cfg = desk_config(m=20)
    u1, u2 = cfg.initial.cell_averages(cfg.grid)
    y0 = fv.pack(u1, u2, cfg.initial.lambda_n, cfg.initial.lambda_s)
    a, ra = newton.solve_implicit_step(y0, cfg.tau, cfg.params, cfg.grid,
                                       cfg.newton)
    b, rb = newton.solve_implicit_step(y0, cfg.tau, cfg.params, cfg.grid,
                                       cfg.newton)
    assert np.array_equal(a, b)
    assert ra.iterations == rb.iterations


def test_step_driver_accepts_guess():
    """A guess near the solution collapses the damped tail; a wild guess
    still lands on the same answer."""
    cfg = desk_config(m=20)
    u1, u2 = cfg.initial.cell_averages(cfg.grid)
    y0 = fv.pack(u1, u2, cfg.initial.lambda_n, cfg.initial.lambda_s)
    y1, cold = newton.solve_implicit_step(y0, cfg.tau, cfg.params, cfg.grid,
                                          cfg.newton)
    y1b, warm = newton.solve_implicit_step(y0, cfg.tau, cfg.params, cfg.grid,
                                           cfg.newton, y_guess=y1.copy())
    assert warm.iterations == 0
    assert warm.iterations < cold.iterations
    assert np.array_equal(y1b, y1)

    # a bad guess costs iterations (fourth-power tail) but not correctness
    roomy = newton.NewtonConfig(tol=cfg.newton.tol, max_iter=2000)
    y1c, _ = newton.solve_implicit_step(y0, cfg.tau, cfg.params, cfg.grid,
                                        roomy, y_guess=y0 + 0.01)
    assert np.max(np.abs(y1c - y1)) <= 1e-8


def test_step_driver_budget_failure():
    cfg = newton.NewtonConfig(tol=1e-14, max_iter=3)
    params = table1_params()
    g = fv.Grid(10)
    y0 = fv.pack(np.full(10, 0.1), np.full(10, 0.1), 1.5e-3, 0.12)
    with pytest.raises(NewtonError) as info:
        newton.solve_implicit_step(y0, 1e-3, params, g, cfg)
    assert info.value.report is not None
    assert not info.value.report.converged
