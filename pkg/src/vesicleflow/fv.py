"""Finite-volume discretization on a uniform grid of (0, 1).

Cells are [j h, (j+1) h), j = 0..m-1, with unknowns the cell averages of
u1 and u2 plus the two reservoir contents.  The packed unknown vector is

    y = [u1_0 .. u1_{m-1} | u2_0 .. u2_{m-1} | Lambda_n | Lambda_s],

length 2 m + 2.  The numerical flux at an interior face combines central
differences with arithmetic face averages,

    J_i = -(D_i/h) (ub0 du_i - ub_i du0) + D_i ub0 ub_i V_i'(x_face),

where ub denotes the face average and dv the cell-to-cell difference; the
boundary faces carry the reservoir exchange fluxes instead.  One implicit
Euler step of size tau has residual

    R_{i,j} = u_{i,j} - u_{i,j}^old + (tau/h) (J_{i,j+1/2} - J_{i,j-1/2}),
    R_Ln    = Ln - Ln^old - tau (J1_1 + J2_1),
    R_Ls    = Ls - Ls^old + tau (J1_0 + J2_0).

Because the same boundary-flux expressions appear in the boundary-cell
rows and in the reservoir rows, h * sum(field residuals) + pool residuals
telescopes to the change of the conserved total
h * sum(u1 + u2) + Ln + Ls, so mass conservation of the solver is exact
up to the Newton stopping tolerance.

The Jacobian of the residual is block tridiagonal in the per-cell pairs
(u1_j, u2_j) with a two-column/two-row border coupling the reservoirs to
the boundary cells; :class:`BorderedJacobian` stores exactly that
structure and solves it by eliminating the border through a 2x2 Schur
complement.
"""

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, LinearSolverError
from . import model

__all__ = [
    "Grid",
    "pack",
    "unpack",
    "validate_state",
    "face_flux",
    "interior_fluxes",
    "all_face_fluxes",
    "assemble_residual",
    "assemble_jacobian",
    "BorderedJacobian",
]


class Grid:
    """Uniform cell decomposition of (0, 1) into m >= 2 cells."""

    __slots__ = ("m", "h")

    def __init__(self, m):
        m = int(m)
        if m < 2:
            raise ValueError("grid needs at least two cells")
        self.m = m
        self.h = 1.0 / m

    def cell_centers(self):
        return (np.arange(self.m) + 0.5) * self.h

    def faces(self):
        return np.arange(self.m + 1) * self.h

    def __repr__(self):
        return f"Grid(m={self.m})"

    def __eq__(self, other):
        return isinstance(other, Grid) and other.m == self.m


def pack(u1, u2, lambda_n, lambda_s):
    """Assemble the packed unknown vector from its parts."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.shape != u2.shape or u1.ndim != 1:
        raise ValueError("u1 and u2 must be 1-d arrays of equal length")
    y = np.empty(2 * u1.size + 2)
    y[: u1.size] = u1
    y[u1.size: 2 * u1.size] = u2
    y[-2] = lambda_n
    y[-1] = lambda_s
    return y


def unpack(y):
    """Split the packed vector into (u1, u2, lambda_n, lambda_s); fields are views."""
    y = np.asarray(y)
    if y.ndim != 1 or y.size < 6 or y.size % 2 != 0:
        raise ValueError("packed vector must have even length 2 m + 2 with m >= 2")
    m = (y.size - 2) // 2
    return y[:m], y[m: 2 * m], float(y[-2]), float(y[-1])


def validate_state(y, params, slack=0.0):
    """Check admissibility of a packed state; raises DomainError naming the issue.

    `slack` loosens every one-sided bound, so accepted Newton iterates may
    sit a rounding error outside the exact set without tripping the check.
    """
    u1, u2, lam_n, lam_s = unpack(y)
    if np.any(u1 < -slack):
        j = int(np.argmin(u1))
        raise DomainError(f"u1[{j}] = {u1[j]:.3e} negative")
    if np.any(u2 < -slack):
        j = int(np.argmin(u2))
        raise DomainError(f"u2[{j}] = {u2[j]:.3e} negative")
    s = u1 + u2
    if np.any(s > 1.0 + slack):
        j = int(np.argmax(s))
        raise DomainError(f"u1[{j}] + u2[{j}] = {s[j]:.12f} exceeds one")
    if not (-slack <= lam_n <= params.lambda_n_max + slack):
        raise DomainError(f"lambda_n = {lam_n:.6e} outside [0, {params.lambda_n_max}]")
    if not (-slack <= lam_s <= params.lambda_s_max + slack):
        raise DomainError(f"lambda_s = {lam_s:.6e} outside [0, {params.lambda_s_max}]")


def face_flux(species, j_face, u1, u2, params, grid):
    """Numerical flux of one species through interior face j_face in 1..m-1."""
    if not 1 <= j_face <= grid.m - 1:
        raise ValueError(
            f"face {j_face} is not interior (valid range 1..{grid.m - 1}); "
            "boundary faces carry reservoir fluxes"
        )
    if species not in (1, 2):
        raise ValueError("species must be 1 or 2")
    L, R = j_face - 1, j_face
    u0 = 1.0 - np.asarray(u1, dtype=float) - np.asarray(u2, dtype=float)
    ui = u1 if species == 1 else u2
    D = params.D1 if species == 1 else params.D2
    pot = params.V1 if species == 1 else params.V2
    g = pot.slope_at_faces(grid)[j_face]
    ub0 = 0.5 * (u0[L] + u0[R])
    ubi = 0.5 * (ui[L] + ui[R])
    dui = ui[R] - ui[L]
    du0 = u0[R] - u0[L]
    return -(D / grid.h) * (ub0 * dui - ubi * du0) + D * ub0 * ubi * g


def interior_fluxes(u1, u2, params, grid):
    """Vectorized fluxes (J1, J2) at the m-1 interior faces."""
    u0 = 1.0 - u1 - u2
    h = grid.h
    g1 = params.V1.slope_at_faces(grid)[1:-1]
    g2 = params.V2.slope_at_faces(grid)[1:-1]
    ub0 = 0.5 * (u0[:-1] + u0[1:])
    du0 = u0[1:] - u0[:-1]
    ub1 = 0.5 * (u1[:-1] + u1[1:])
    ub2 = 0.5 * (u2[:-1] + u2[1:])
    j1 = -(params.D1 / h) * (ub0 * (u1[1:] - u1[:-1]) - ub1 * du0) + params.D1 * ub0 * ub1 * g1
    j2 = -(params.D2 / h) * (ub0 * (u2[1:] - u2[:-1]) - ub2 * du0) + params.D2 * ub0 * ub2 * g2
    return j1, j2


def all_face_fluxes(y, params, grid):
    """Fluxes (J1, J2) at all m+1 faces of a packed state, boundaries included."""
    u1, u2, lam_n, lam_s = unpack(y)
    j1 = np.empty(grid.m + 1)
    j2 = np.empty(grid.m + 1)
    j1[1:-1], j2[1:-1] = interior_fluxes(u1, u2, params, grid)
    b = model.boundary_fluxes(u1[0], u2[0], u1[-1], u2[-1], lam_n, lam_s, params)
    j1[0], j1[-1], j2[0], j2[-1] = b
    return j1, j2


def _boundary_fluxes_raw(u1, u2, lam_n, lam_s, params):
    # same formulas as model.boundary_fluxes without admissibility checks;
    # Newton iterates may leave the admissible set transiently
    u0l = 1.0 - u1[0] - u2[0]
    u0r = 1.0 - u1[-1] - u2[-1]
    occ_n = lam_n / params.lambda_n_max
    occ_s = lam_s / params.lambda_s_max
    j1_0 = params.alpha1 * occ_s * u0l
    j1_1 = params.beta1 * (1.0 - occ_n) * u0r * u1[-1]
    j2_0 = -params.beta2 * (1.0 - occ_s) * u0l * u2[0]
    j2_1 = -params.alpha2 * occ_n * u0r
    return j1_0, j1_1, j2_0, j2_1


def assemble_residual(y_new, y_old, params, grid, tau):
    """Implicit Euler residual of one step, evaluated at the new state."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    u1, u2, lam_n, lam_s = unpack(np.asarray(y_new, dtype=float))
    u1o, u2o, lam_no, lam_so = unpack(np.asarray(y_old, dtype=float))
    m, h = grid.m, grid.h
    f1 = np.empty(m + 1)
    f2 = np.empty(m + 1)
    f1[1:-1], f2[1:-1] = interior_fluxes(u1, u2, params, grid)
    f1[0], f1[-1], f2[0], f2[-1] = _boundary_fluxes_raw(u1, u2, lam_n, lam_s, params)
    res = np.empty(2 * m + 2)
    r = tau / h
    res[:m] = u1 - u1o + r * (f1[1:] - f1[:-1])
    res[m: 2 * m] = u2 - u2o + r * (f2[1:] - f2[:-1])
    res[2 * m] = lam_n - lam_no - tau * (f1[-1] + f2[-1])
    res[2 * m + 1] = lam_s - lam_so + tau * (f1[0] + f2[0])
    return res


class BorderedJacobian:
    """Jacobian of the step residual: block tridiagonal plus a 2x2 border.

    Field rows/columns are grouped per cell as (u1_j, u2_j); `sub`, `diag`
    and `sup` hold the (m, 2, 2) block diagonals.  The border consists of
    the reservoir columns hitting the first and last cells (`bcol_first`,
    `bcol_last`, each 2x2 with columns ordered (Ln, Ls)) and the reservoir
    rows reading the boundary cells (`brow_first`, `brow_last`), plus the
    2x2 reservoir diagonal `pool`.
    """

    def __init__(self, m, sub, diag, sup, bcol_first, bcol_last,
                 brow_first, brow_last, pool):
        self.m = m
        self.sub = sub
        self.diag = diag
        self.sup = sup
        self.bcol_first = bcol_first
        self.bcol_last = bcol_last
        self.brow_first = brow_first
        self.brow_last = brow_last
        self.pool = pool

    def to_dense(self):
        """Dense matrix in the packed layout [u1 | u2 | Ln | Ls]; for tests."""
        m = self.m
        n = 2 * m + 2
        a = np.zeros((n, n))

        def put(block, row_cell, col_cell):
            rows = (row_cell, m + row_cell)
            cols = (col_cell, m + col_cell)
            for bi in range(2):
                for bj in range(2):
                    a[rows[bi], cols[bj]] = block[bi, bj]

        for j in range(m):
            put(self.diag[j], j, j)
            if j > 0:
                put(self.sub[j], j, j - 1)
            if j < m - 1:
                put(self.sup[j], j, j + 1)
        for bi in range(2):
            a[(0, m)[bi], 2 * m] = self.bcol_first[bi, 0]
            a[(0, m)[bi], 2 * m + 1] = self.bcol_first[bi, 1]
            a[(m - 1, 2 * m - 1)[bi], 2 * m] = self.bcol_last[bi, 0]
            a[(m - 1, 2 * m - 1)[bi], 2 * m + 1] = self.bcol_last[bi, 1]
            a[2 * m + bi, 0] = self.brow_first[bi, 0]
            a[2 * m + bi, m] = self.brow_first[bi, 1]
            a[2 * m + bi, m - 1] = self.brow_last[bi, 0]
            a[2 * m + bi, 2 * m - 1] = self.brow_last[bi, 1]
        a[2 * m:, 2 * m:] = self.pool
        return a

    def _field_banded(self):
        # interleaved ordering (u1_j, u2_j) -> (2j, 2j+1), bandwidth 3,
        # packed for scipy.linalg.solve_banded
        m = self.m
        n = 2 * m
        ab = np.zeros((7, n))

        def put(block, row_cell, col_cell):
            for bi in range(2):
                for bj in range(2):
                    r = 2 * row_cell + bi
                    c = 2 * col_cell + bj
                    ab[3 + r - c, c] = block[bi, bj]

        for j in range(m):
            put(self.diag[j], j, j)
            if j > 0:
                put(self.sub[j], j, j - 1)
            if j < m - 1:
                put(self.sup[j], j, j + 1)
        return ab

    def solve(self, rhs):
        """Direct solve of J x = rhs by banded LU plus a Schur complement."""
        m = self.m
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (2 * m + 2,):
            raise ValueError("right-hand side has the wrong length")
        # gather per-cell interleaved field rhs and the three border columns
        fr = np.empty((2 * m, 3))
        fr[0::2, 0] = rhs[:m]
        fr[1::2, 0] = rhs[m: 2 * m]
        fr[:, 1] = 0.0
        fr[:, 2] = 0.0
        fr[0:2, 1] = self.bcol_first[:, 0]
        fr[0:2, 2] = self.bcol_first[:, 1]
        fr[-2:, 1] += self.bcol_last[:, 0]
        fr[-2:, 2] += self.bcol_last[:, 1]
        ab = self._field_banded()
        try:
            x = solve_banded((3, 3), ab, fr)
        except np.linalg.LinAlgError as exc:
            raise LinearSolverError(f"singular field block: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise LinearSolverError("field solve produced non-finite values")
        # Schur complement in the two reservoir unknowns
        cx = np.empty((2, 3))
        for r in range(2):
            for c in range(3):
                cx[r, c] = (self.brow_first[r, 0] * x[0, c]
                            + self.brow_first[r, 1] * x[1, c]
                            + self.brow_last[r, 0] * x[-2, c]
                            + self.brow_last[r, 1] * x[-1, c])
        schur = self.pool - cx[:, 1:]
        det = schur[0, 0] * schur[1, 1] - schur[0, 1] * schur[1, 0]
        if det == 0.0 or not np.isfinite(det):
            raise LinearSolverError("singular reservoir Schur complement")
        g = rhs[2 * m:] - cx[:, 0]
        lam = np.array([
            (schur[1, 1] * g[0] - schur[0, 1] * g[1]) / det,
            (schur[0, 0] * g[1] - schur[1, 0] * g[0]) / det,
        ])
        xf = x[:, 0] - x[:, 1] * lam[0] - x[:, 2] * lam[1]
        out = np.empty(2 * m + 2)
        out[:m] = xf[0::2]
        out[m: 2 * m] = xf[1::2]
        out[2 * m:] = lam
        return out


def assemble_jacobian(y_new, params, grid, tau):
    """Analytic Jacobian of :func:`assemble_residual` at the new state."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    u1, u2, lam_n, lam_s = unpack(np.asarray(y_new, dtype=float))
    m, h = grid.m, grid.h
    D1, D2 = params.D1, params.D2
    r = tau / h
    u0 = 1.0 - u1 - u2
    g1 = params.V1.slope_at_faces(grid)
    g2 = params.V2.slope_at_faces(grid)

    # interior face derivative stencils, faces f = 1..m-1 (index 0 here)
    ub0 = 0.5 * (u0[:-1] + u0[1:])
    du0 = u0[1:] - u0[:-1]
    ub1 = 0.5 * (u1[:-1] + u1[1:])
    du1 = u1[1:] - u1[:-1]
    ub2 = 0.5 * (u2[:-1] + u2[1:])
    du2 = u2[1:] - u2[:-1]
    g1f = g1[1:-1]
    g2f = g2[1:-1]

    dj1_aL = (D1 / h) * (0.5 * du1 + ub0 + 0.5 * du0 + ub1) + 0.5 * D1 * g1f * (ub0 - ub1)
    dj1_aR = (D1 / h) * (0.5 * du1 - ub0 + 0.5 * du0 - ub1) + 0.5 * D1 * g1f * (ub0 - ub1)
    dj1_bL = (D1 / h) * (0.5 * du1 + ub1) - 0.5 * D1 * g1f * ub1
    dj1_bR = (D1 / h) * (0.5 * du1 - ub1) - 0.5 * D1 * g1f * ub1

    dj2_bL = (D2 / h) * (0.5 * du2 + ub0 + 0.5 * du0 + ub2) + 0.5 * D2 * g2f * (ub0 - ub2)
    dj2_bR = (D2 / h) * (0.5 * du2 - ub0 + 0.5 * du0 - ub2) + 0.5 * D2 * g2f * (ub0 - ub2)
    dj2_aL = (D2 / h) * (0.5 * du2 + ub2) - 0.5 * D2 * g2f * ub2
    dj2_aR = (D2 / h) * (0.5 * du2 - ub2) - 0.5 * D2 * g2f * ub2

    sub = np.zeros((m, 2, 2))
    diag = np.zeros((m, 2, 2))
    sup = np.zeros((m, 2, 2))

    # row j gains +(tau/h) dJ_{f=j+1} and -(tau/h) dJ_{f=j}
    # contribution of the right face (f = j+1, interior for j <= m-2)
    diag[:-1, 0, 0] += r * dj1_aL
    diag[:-1, 0, 1] += r * dj1_bL
    diag[:-1, 1, 0] += r * dj2_aL
    diag[:-1, 1, 1] += r * dj2_bL
    sup[:-1, 0, 0] = r * dj1_aR
    sup[:-1, 0, 1] = r * dj1_bR
    sup[:-1, 1, 0] = r * dj2_aR
    sup[:-1, 1, 1] = r * dj2_bR
    # contribution of the left face (f = j, interior for j >= 1)
    diag[1:, 0, 0] -= r * dj1_aR
    diag[1:, 0, 1] -= r * dj1_bR
    diag[1:, 1, 0] -= r * dj2_aR
    diag[1:, 1, 1] -= r * dj2_bR
    sub[1:, 0, 0] = -r * dj1_aL
    sub[1:, 0, 1] = -r * dj1_bL
    sub[1:, 1, 0] = -r * dj2_aL
    sub[1:, 1, 1] = -r * dj2_bL
    diag[:, 0, 0] += 1.0
    diag[:, 1, 1] += 1.0

    # boundary exchange fluxes and their derivatives
    occ_n = lam_n / params.lambda_n_max
    occ_s = lam_s / params.lambda_s_max
    a1, a2 = params.alpha1, params.alpha2
    b1, b2 = params.beta1, params.beta2
    u0l, u0r = u0[0], u0[-1]
    # left face: J1_0 = a1 occ_s u0l, J2_0 = -b2 (1 - occ_s) u0l u2[0]
    dj10_a = -a1 * occ_s
    dj10_b = -a1 * occ_s
    dj10_ls = a1 * u0l / params.lambda_s_max
    dj20_a = b2 * (1.0 - occ_s) * u2[0]
    dj20_b = -b2 * (1.0 - occ_s) * (u0l - u2[0])
    dj20_ls = b2 * u0l * u2[0] / params.lambda_s_max
    # right face: J1_1 = b1 (1 - occ_n) u0r u1[-1], J2_1 = -a2 occ_n u0r
    dj11_a = b1 * (1.0 - occ_n) * (u0r - u1[-1])
    dj11_b = -b1 * (1.0 - occ_n) * u1[-1]
    dj11_ln = -b1 * u0r * u1[-1] / params.lambda_n_max
    dj21_a = a2 * occ_n
    dj21_b = a2 * occ_n
    dj21_ln = -a2 * u0r / params.lambda_n_max

    diag[0, 0, 0] -= r * dj10_a
    diag[0, 0, 1] -= r * dj10_b
    diag[0, 1, 0] -= r * dj20_a
    diag[0, 1, 1] -= r * dj20_b
    diag[-1, 0, 0] += r * dj11_a
    diag[-1, 0, 1] += r * dj11_b
    diag[-1, 1, 0] += r * dj21_a
    diag[-1, 1, 1] += r * dj21_b

    bcol_first = np.zeros((2, 2))
    bcol_first[0, 1] = -r * dj10_ls
    bcol_first[1, 1] = -r * dj20_ls
    bcol_last = np.zeros((2, 2))
    bcol_last[0, 0] = r * dj11_ln
    bcol_last[1, 0] = r * dj21_ln

    # reservoir rows: R_Ln = Ln - Ln_old - tau (J1_1 + J2_1),
    #                 R_Ls = Ls - Ls_old + tau (J1_0 + J2_0)
    brow_first = np.zeros((2, 2))
    brow_first[1, 0] = tau * (dj10_a + dj20_a)
    brow_first[1, 1] = tau * (dj10_b + dj20_b)
    brow_last = np.zeros((2, 2))
    brow_last[0, 0] = -tau * (dj11_a + dj21_a)
    brow_last[0, 1] = -tau * (dj11_b + dj21_b)
    pool = np.array([
        [1.0 - tau * (dj11_ln + dj21_ln), 0.0],
        [0.0, 1.0 + tau * (dj10_ls + dj20_ls)],
    ])
    return BorderedJacobian(m, sub, diag, sup, bcol_first, bcol_last,
                            brow_first, brow_last, pool)
