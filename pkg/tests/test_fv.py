"""Spatial discretization: packing, face fluxes, residual assembly against a
naive reference implementation, exact conservation telescoping, and the
analytic Jacobian against finite differences."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vesicleflow import fv, model, timeloop
from vesicleflow.errors import DomainError

from conftest import table1_params


def random_packed(rng, m, params):
    u1 = rng.uniform(0.02, 0.45, m)
    u2 = rng.uniform(0.02, 0.45, m)
    ln = rng.uniform(0.1, 0.9) * params.lambda_n_max
    ls = rng.uniform(0.1, 0.9) * params.lambda_s_max
    return fv.pack(u1, u2, ln, ls)


def naive_residual(y_new, y_old, params, grid, tau):
    """Straight-from-the-formulas reference assembly, one face at a time.

    Independent of the production code path: scalar loops, explicit flux
    array, no shared helpers beyond the boundary-flux formulas written out
    longhand.
    """
    m, h = grid.m, grid.h
    u1 = np.asarray(y_new[:m])
    u2 = np.asarray(y_new[m:2 * m])
    ln, ls = y_new[2 * m], y_new[2 * m + 1]
    u0 = 1.0 - u1 - u2
    g1 = params.V1.slope_at_faces(grid)
    g2 = params.V2.slope_at_faces(grid)

    f1 = np.zeros(m + 1)
    f2 = np.zeros(m + 1)
    for f in range(1, m):
        L, R = f - 1, f
        ub0 = 0.5 * (u0[L] + u0[R])
        ub1 = 0.5 * (u1[L] + u1[R])
        ub2 = 0.5 * (u2[L] + u2[R])
        f1[f] = (-(params.D1 / h) * (ub0 * (u1[R] - u1[L]) - ub1 * (u0[R] - u0[L]))
                 + params.D1 * ub0 * ub1 * g1[f])
        f2[f] = (-(params.D2 / h) * (ub0 * (u2[R] - u2[L]) - ub2 * (u0[R] - u0[L]))
                 + params.D2 * ub0 * ub2 * g2[f])
    f1[0] = params.alpha1 * (ls / params.lambda_s_max) * u0[0]
    f1[m] = params.beta1 * (1 - ln / params.lambda_n_max) * u0[-1] * u1[-1]
    f2[0] = -params.beta2 * (1 - ls / params.lambda_s_max) * u0[0] * u2[0]
    f2[m] = -params.alpha2 * (ln / params.lambda_n_max) * u0[-1]

    res = np.zeros(2 * m + 2)
    for j in range(m):
        res[j] = u1[j] - y_old[j] + (tau / h) * (f1[j + 1] - f1[j])
        res[m + j] = u2[j] - y_old[m + j] + (tau / h) * (f2[j + 1] - f2[j])
    res[2 * m] = ln - y_old[2 * m] - tau * (f1[m] + f2[m])
    res[2 * m + 1] = ls - y_old[2 * m + 1] + tau * (f1[0] + f2[0])
    return res


# ------------------------------------------------------------------- grid

def test_grid_geometry():
    g = fv.Grid(4)
    assert g.h * g.m == 1.0
    assert_allclose(g.cell_centers(), [0.125, 0.375, 0.625, 0.875], rtol=0)
    assert_allclose(g.faces(), [0.0, 0.25, 0.5, 0.75, 1.0], rtol=0)


def test_grid_rejects_tiny():
    with pytest.raises(ValueError):
        fv.Grid(1)


# ---------------------------------------------------------------- packing

def test_pack_unpack_round_trip(rng):
    u1 = rng.uniform(0.0, 0.4, 7)
    u2 = rng.uniform(0.0, 0.4, 7)
    y = fv.pack(u1, u2, 0.25, 0.75)
    r1, r2, ln, ls = fv.unpack(y)
    assert_allclose(r1, u1, rtol=0)
    assert_allclose(r2, u2, rtol=0)
    assert ln == 0.25 and ls == 0.75
    assert y.size == 16


def test_unpack_rejects_bad_sizes():
    with pytest.raises(ValueError):
        fv.unpack(np.zeros(7))   # odd length
    with pytest.raises(ValueError):
        fv.unpack(np.zeros(4))   # m < 2


def test_validate_state_slack():
    params = table1_params()
    y = fv.pack(np.full(4, 0.1), np.full(4, 0.1), 1.5e-3, 0.12)
    fv.validate_state(y, params)
    y[0] = -1e-13
    with pytest.raises(DomainError):
        fv.validate_state(y, params)
    fv.validate_state(y, params, slack=1e-12)
    y[-2] = params.lambda_n_max + 1e-9
    with pytest.raises(DomainError, match="lambda_n"):
        fv.validate_state(y, params, slack=1e-12)


# ------------------------------------------------------------- face fluxes

def test_face_flux_uniform_drift():
    """Gradient terms vanish on a uniform field; only the drift survives,
    pushing species 1 toward x = 1 for a positive potential slope."""
    params = table1_params()
    g = fv.Grid(100)
    u = np.full(100, 0.1)
    for f in (1, 37, 99):
        j1 = fv.face_flux(1, f, u, u, params, g)
        assert math.isclose(j1, 4e-4 * 0.8 * 0.1 * 1.75, rel_tol=1e-14)
        assert abs(j1 - 5.6e-5) < 1e-19
        j2 = fv.face_flux(2, f, u, u, params, g)
        assert math.isclose(j2, 4e-3 * 0.8 * 0.1 * (-1.5), rel_tol=1e-14)


def test_face_flux_uniform_no_potential_vanishes():
    params = table1_params(V1=model.Potential.linear(0.0),
                           V2=model.Potential.linear(0.0))
    g = fv.Grid(10)
    u = np.full(10, 0.17)
    for f in range(1, 10):
        assert fv.face_flux(1, f, u, u, params, g) == 0.0
        assert fv.face_flux(2, f, u, u, params, g) == 0.0


def test_face_flux_two_cell_value():
    params = table1_params(D1=1.0, D2=1.0,
                           V1=model.Potential.linear(0.0),
                           V2=model.Potential.linear(0.0))
    g = fv.Grid(2)
    j = fv.face_flux(1, 1, np.array([0.1, 0.2]), np.zeros(2), params, g)
    # -(1/0.5) * (0.85 * 0.1 - 0.15 * (-0.1)) = -0.2
    assert math.isclose(j, -0.2, rel_tol=1e-14)


def test_face_flux_reflection_antisymmetry(rng):
    """Reflecting the field and negating the potential slope negates the
    flux through the mirrored face."""
    params = table1_params()
    mirrored = table1_params(V1=model.Potential.linear(-1.75),
                             V2=model.Potential.linear(1.5))
    g = fv.Grid(16)
    u1 = rng.uniform(0.05, 0.4, 16)
    u2 = rng.uniform(0.05, 0.4, 16)
    for f in (1, 5, 11, 15):
        a = fv.face_flux(1, f, u1, u2, params, g)
        b = fv.face_flux(1, g.m - f, u1[::-1].copy(), u2[::-1].copy(),
                         mirrored, g)
        assert math.isclose(a, -b, rel_tol=1e-12)


def test_face_flux_rejects_boundary_faces():
    params = table1_params()
    g = fv.Grid(8)
    u = np.full(8, 0.1)
    for f in (0, 8):
        with pytest.raises(ValueError):
            fv.face_flux(1, f, u, u, params, g)


def test_interior_fluxes_match_scalar(rng):
    params = table1_params()
    g = fv.Grid(12)
    u1 = rng.uniform(0.05, 0.4, 12)
    u2 = rng.uniform(0.05, 0.4, 12)
    j1, j2 = fv.interior_fluxes(u1, u2, params, g)
    for f in range(1, 12):
        assert math.isclose(j1[f - 1], fv.face_flux(1, f, u1, u2, params, g),
                            rel_tol=1e-14)
        assert math.isclose(j2[f - 1], fv.face_flux(2, f, u1, u2, params, g),
                            rel_tol=1e-14)


def test_all_face_fluxes_boundary_rows(rng):
    params = table1_params()
    g = fv.Grid(9)
    y = random_packed(rng, 9, params)
    u1, u2, ln, ls = fv.unpack(y)
    j1, j2 = fv.all_face_fluxes(y, params, g)
    bf = model.boundary_fluxes(u1[0], u2[0], u1[-1], u2[-1], ln, ls, params)
    assert (j1[0], j1[-1], j2[0], j2[-1]) == bf


# --------------------------------------------------------------- residual

def test_residual_zero_state_fixed_point():
    params = table1_params()
    g = fv.Grid(6)
    y = fv.pack(np.zeros(6), np.zeros(6), 0.0, 0.0)
    res = fv.assemble_residual(y, y, params, g, 1e-3)
    assert np.all(res == 0.0)


def test_residual_against_naive_assembly(rng):
    params = table1_params()
    g = fv.Grid(4)
    for _ in range(20):
        y_new = random_packed(rng, 4, params)
        y_old = random_packed(rng, 4, params)
        got = fv.assemble_residual(y_new, y_old, params, g, 7e-4)
        want = naive_residual(y_new, y_old, params, g, 7e-4)
        assert np.max(np.abs(got - want)) <= 1e-14


def test_residual_rejects_nonpositive_tau():
    params = table1_params()
    g = fv.Grid(4)
    y = fv.pack(np.full(4, 0.1), np.full(4, 0.1), 1e-3, 0.1)
    with pytest.raises(ValueError):
        fv.assemble_residual(y, y, params, g, 0.0)


def test_residual_telescoping(rng):
    """h-weighted field rows plus the two reservoir rows must sum to the
    change of the conserved total: every flux cancels in pairs."""
    params = table1_params()
    g = fv.Grid(16)
    for _ in range(10):
        y_new = random_packed(rng, 16, params)
        y_old = random_packed(rng, 16, params)
        res = fv.assemble_residual(y_new, y_old, params, g, 5e-4)
        m = g.m
        weighted = g.h * res[:2 * m].sum() + res[2 * m:].sum()
        dm = (timeloop.conserved_total(y_new, g)
              - timeloop.conserved_total(y_old, g))
        assert abs(weighted - dm) <= 1e-14


# --------------------------------------------------------------- jacobian

def fd_jacobian(y, params, grid, tau, eps=1e-7):
    n = y.size
    out = np.empty((n, n))
    for j in range(n):
        yp = y.copy()
        ym = y.copy()
        yp[j] += eps
        ym[j] -= eps
        out[:, j] = (fv.assemble_residual(yp, y, params, grid, tau)
                     - fv.assemble_residual(ym, y, params, grid, tau)) / (2 * eps)
    return out


def test_jacobian_matches_finite_differences(rng):
    params = table1_params()
    g = fv.Grid(8)
    tau = 1e-3
    for _ in range(5):
        y = random_packed(rng, 8, params)
        dense = fv.assemble_jacobian(y, params, g, tau).to_dense()
        fd = fd_jacobian(y, params, g, tau)
        scale = max(1.0, np.max(np.abs(dense)))
        assert np.max(np.abs(dense - fd)) / scale <= 1e-6


def test_jacobian_linear_in_tau(rng):
    # residual is y_new - y_old + tau * (flux divergence), so
    # J(tau) = I + tau * B; check B extracted at two step sizes agrees
    params = table1_params()
    g = fv.Grid(6)
    y = random_packed(rng, 6, params)
    eye = np.eye(y.size)
    b_half = (fv.assemble_jacobian(y, params, g, 0.5).to_dense() - eye) / 0.5
    b_unit = fv.assemble_jacobian(y, params, g, 1.0).to_dense() - eye
    assert_allclose(b_half, b_unit, rtol=1e-12, atol=1e-15)
    # and the tau -> 0 limit is the identity
    tiny = fv.assemble_jacobian(y, params, g, 1e-14).to_dense()
    assert np.max(np.abs(tiny - eye)) <= 1e-11


def test_jacobian_species_swap_reflection_symmetry():
    """With mirrored parameters and a reflection-symmetric state, the system
    commutes with (species swap) x (cell reflection)."""
    params = table1_params(alpha1=0.3, alpha2=0.3, beta1=2.0, beta2=2.0,
                           D1=1e-3, D2=1e-3,
                           lambda_n_max=0.2, lambda_s_max=0.2,
                           V1=model.Potential.linear(1.2),
                           V2=model.Potential.linear(-1.2))
    m = 6
    g = fv.Grid(m)
    y = fv.pack(np.full(m, 0.1), np.full(m, 0.1), 0.05, 0.05)
    dense = fv.assemble_jacobian(y, params, g, 1e-3).to_dense()
    # permutation: u1_j <-> u2_{m-1-j}, lambda_n <-> lambda_s
    perm = np.concatenate([np.arange(2 * m - 1, m - 1, -1),
                           np.arange(m - 1, -1, -1),
                           [2 * m + 1, 2 * m]]).astype(int)
    assert_allclose(dense[np.ix_(perm, perm)], dense, rtol=0, atol=1e-14)


def test_bordered_solve_matches_dense(rng):
    params = table1_params()
    g = fv.Grid(10)
    for _ in range(5):
        y = random_packed(rng, 10, params)
        jac = fv.assemble_jacobian(y, params, g, 1e-3)
        rhs = rng.standard_normal(y.size)
        x = jac.solve(rhs)
        x_ref = np.linalg.solve(jac.to_dense(), rhs)
        assert_allclose(x, x_ref, rtol=1e-9, atol=1e-12)
