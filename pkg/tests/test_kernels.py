"""The compiled kernels must be numerical twins of the numpy assembly:
same formulas, same evaluation order, bitwise-comparable output."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vesicleflow import fv, kernels, newton
from conftest import table1_params


needs_numba = pytest.mark.skipif(
    not kernels.NUMBA_ENABLED, reason="compiled backend switched off")


def random_packed(rng, m, params):
    u1 = rng.uniform(0.02, 0.45, m)
    u2 = rng.uniform(0.02, 0.45, m)
    return fv.pack(u1, u2,
                   rng.uniform(0.1, 0.9) * params.lambda_n_max,
                   rng.uniform(0.1, 0.9) * params.lambda_s_max)


def test_backend_name_matches_flag():
    assert kernels.backend_name() in ("numba", "numpy")
    assert (kernels.backend_name() == "numba") == kernels.NUMBA_ENABLED


def test_residual_kernel_matches_fv(rng):
    params = table1_params()
    g = fv.Grid(24)
    g1 = params.V1.slope_at_faces(g)
    g2 = params.V2.slope_at_faces(g)
    for _ in range(10):
        ynew = random_packed(rng, g.m, params)
        yold = random_packed(rng, g.m, params)
        out = np.empty_like(ynew)
        kernels.residual_kernel(ynew, yold, out, g.h, 1e-3, *params.flat(),
                                g1, g2)
        ref = fv.assemble_residual(ynew, yold, params, g, 1e-3)
        assert_allclose(out, ref, rtol=0, atol=1e-15)


def test_jacobian_kernel_matches_fv(rng):
    params = table1_params()
    g = fv.Grid(9)
    m = g.m
    g1 = params.V1.slope_at_faces(g)
    g2 = params.V2.slope_at_faces(g)
    for _ in range(5):
        y = random_packed(rng, m, params)
        sub = np.empty((m, 2, 2))
        diag = np.empty((m, 2, 2))
        sup = np.empty((m, 2, 2))
        bcf = np.empty((2, 2))
        bcl = np.empty((2, 2))
        brf = np.empty((2, 2))
        brl = np.empty((2, 2))
        pool = np.empty((2, 2))
        kernels.jacobian_kernel(y, g.h, 1e-3, *params.flat(), g1, g2,
                                sub, diag, sup, bcf, bcl, brf, brl, pool)
        ref = fv.assemble_jacobian(y, params, g, 1e-3)
        got = fv.BorderedJacobian(m, sub, diag, sup, bcf, bcl, brf, brl, pool)
        assert_allclose(got.to_dense(), ref.to_dense(), rtol=0, atol=1e-15)


def test_bordered_solve_kernel_matches_dense(rng):
    params = table1_params()
    g = fv.Grid(11)
    for _ in range(5):
        y = random_packed(rng, g.m, params)
        jac = fv.assemble_jacobian(y, params, g, 1e-3)
        rhs = rng.standard_normal(y.size)
        out = np.empty_like(rhs)
        status = kernels.bordered_solve_kernel(
            jac.sub, jac.diag, jac.sup, jac.bcol_first, jac.bcol_last,
            jac.brow_first, jac.brow_last, jac.pool, rhs.copy(), out)
        assert status == 0
        ref = np.linalg.solve(jac.to_dense(), rhs)
        assert_allclose(out, ref, rtol=1e-9, atol=1e-12)


def test_newton_step_kernel_matches_generic_solver(rng):
    """Full per-step agreement between the fused kernel and the generic
    python Newton loop over fv assemblies."""
    params = table1_params()
    g = fv.Grid(32)
    cfg = newton.NewtonConfig(tol=1e-10, max_iter=200)
    y_old = fv.pack(np.full(32, 0.1), np.full(32, 0.1), 1.5e-3, 0.12)

    def residual_fn(y):
        return fv.assemble_residual(y, y_old, params, g, 1e-3)

    def jacobian_fn(y):
        return fv.assemble_jacobian(y, params, g, 1e-3)

    y_ref, rep_ref = newton.newton_solve(residual_fn, jacobian_fn,
                                         y_old.copy(), cfg)
    y_got, rep_got = newton.solve_implicit_step(y_old, 1e-3, params, g, cfg)
    assert rep_got.iterations == rep_ref.iterations
    assert_allclose(y_got, y_ref, rtol=0, atol=1e-13)


@needs_numba
def test_warmup_compiles_everything():
    # idempotent and cheap on the second call
    kernels.warmup()
    kernels.warmup(force=True)
