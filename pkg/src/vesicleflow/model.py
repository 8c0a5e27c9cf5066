"""Continuous model: two vesicle species with size exclusion on (0, 1).

Volume fractions u1 (anterograde) and u2 (retrograde) share the interval
with the void fraction u0 = 1 - u1 - u2.  Each species carries a flux

    J_i = -D_i (u0 du_i/dx - u_i du0/dx - u0 u_i dV_i/dx),

so the pair solves dt u_i + dx J_i = 0 with the cross-diffusion matrix

    A(u) = [[D1 (1 - u2), D1 u1], [D2 u2, D2 (1 - u1)]].

Two reservoirs close the system.  The pool Lambda_s feeds species 1 at
x = 0 and absorbs species 2 there; Lambda_n mirrors this at x = 1:

    J1(0) =  alpha1 (Ls/Ls_max) u0(0)
    J1(1) =  beta1 (1 - Ln/Ln_max) u0(1) u1(1)
    J2(0) = -beta2 (1 - Ls/Ls_max) u0(0) u2(0)
    J2(1) = -alpha2 (Ln/Ln_max) u0(1)
    dt Ln =  J1(1) + J2(1),   dt Ls = -(J1(0) + J2(0)).

The Boltzmann-type entropy h(u) = sum_i u_i (log u_i - 1), i in {0,1,2},
yields the free energy E[u] = int (h(u) - u1 V1 - u2 V2) dx, which decays
along closed-system (alpha = beta = 0) solutions.  Its Hessian h''(u)
symmetrizes A(u): the product h'' A admits the lower bound implemented in
:func:`quadratic_form_sides`, which is the algebraic heart of the
boundedness and existence theory.
"""

import numpy as np

from .errors import DomainError, SingularStateError

__all__ = [
    "Potential",
    "ModelParameters",
    "entropy_density",
    "free_energy",
    "diffusion_matrix",
    "entropy_hessian",
    "quadratic_form_sides",
    "entropy_variables",
    "inverse_entropy_variables",
    "boundary_fluxes",
]


class Potential:
    """External potential V_i driving one species.

    Two kinds are supported:

    * ``linear``: V(x) = slope * x, the production case.
    * ``tabulated``: dV/dx prescribed at the m + 1 cell faces of the grid
      the simulation runs on; values at cell centers are recovered by
      integration with the gauge V(0) = 0.
    """

    __slots__ = ("kind", "slope", "face_slopes")

    def __init__(self, kind, slope=0.0, face_slopes=None):
        if kind not in ("linear", "tabulated"):
            raise ValueError(f"unknown potential kind {kind!r}")
        if kind == "tabulated":
            if face_slopes is None:
                raise ValueError("tabulated potential needs face_slopes")
            face_slopes = np.asarray(face_slopes, dtype=float)
            if face_slopes.ndim != 1 or face_slopes.size < 3:
                raise ValueError("face_slopes must be 1-d with >= 3 entries")
        self.kind = kind
        self.slope = float(slope)
        self.face_slopes = face_slopes

    @classmethod
    def linear(cls, slope):
        return cls("linear", slope=slope)

    @classmethod
    def tabulated(cls, face_slopes):
        return cls("tabulated", face_slopes=face_slopes)

    def slope_at_faces(self, grid):
        """dV/dx at the m + 1 faces of `grid`."""
        if self.kind == "linear":
            return np.full(grid.m + 1, self.slope)
        if self.face_slopes.size != grid.m + 1:
            raise ValueError(
                f"tabulated potential has {self.face_slopes.size} face slopes, "
                f"grid with m={grid.m} needs {grid.m + 1}"
            )
        return self.face_slopes.copy()

    def value_at_centers(self, grid):
        """V at the m cell centers, gauge V(0) = 0."""
        if self.kind == "linear":
            return self.slope * grid.cell_centers()
        s = self.slope_at_faces(grid)
        h = grid.h
        v = np.empty(grid.m)
        # march from the left boundary: half step with the boundary-face
        # slope, then full steps with interior-face slopes
        v[0] = 0.5 * h * s[0]
        for j in range(1, grid.m):
            v[j] = v[j - 1] + h * s[j]
        return v

    def __eq__(self, other):
        if not isinstance(other, Potential):
            return NotImplemented
        if self.kind != other.kind:
            return False
        if self.kind == "linear":
            return self.slope == other.slope
        return np.array_equal(self.face_slopes, other.face_slopes)

    def __repr__(self):
        if self.kind == "linear":
            return f"Potential.linear({self.slope})"
        return f"Potential.tabulated(<{self.face_slopes.size} faces>)"


class ModelParameters:
    """Rates, diffusivities, reservoir capacities and potentials.

    alpha_i are the pool-to-domain injection rates, beta_i the
    domain-to-pool absorption rates; species 1 is injected at x = 0 and
    absorbed at x = 1, species 2 the other way around.
    """

    __slots__ = (
        "alpha1", "alpha2", "beta1", "beta2", "D1", "D2",
        "lambda_n_max", "lambda_s_max", "V1", "V2",
    )

    def __init__(self, alpha1, alpha2, beta1, beta2, D1, D2,
                 lambda_n_max, lambda_s_max, V1, V2):
        if D1 <= 0 or D2 <= 0:
            raise ValueError("diffusion coefficients must be positive")
        if min(alpha1, alpha2, beta1, beta2) < 0:
            raise ValueError("exchange rates must be nonnegative")
        if lambda_n_max <= 0 or lambda_s_max <= 0:
            raise ValueError("reservoir capacities must be positive")
        self.alpha1 = float(alpha1)
        self.alpha2 = float(alpha2)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.D1 = float(D1)
        self.D2 = float(D2)
        self.lambda_n_max = float(lambda_n_max)
        self.lambda_s_max = float(lambda_s_max)
        self.V1 = V1 if isinstance(V1, Potential) else Potential.linear(V1)
        self.V2 = V2 if isinstance(V2, Potential) else Potential.linear(V2)

    def flat(self):
        """Scalar parameters as a tuple consumed by the compiled kernels."""
        return (self.D1, self.D2, self.alpha1, self.alpha2,
                self.beta1, self.beta2, self.lambda_n_max, self.lambda_s_max)

    def __repr__(self):
        return (
            f"ModelParameters(alpha1={self.alpha1}, alpha2={self.alpha2}, "
            f"beta1={self.beta1}, beta2={self.beta2}, D1={self.D1}, D2={self.D2}, "
            f"lambda_n_max={self.lambda_n_max}, lambda_s_max={self.lambda_s_max}, "
            f"V1={self.V1!r}, V2={self.V2!r})"
        )


def _check_admissible(u1, u2, tol=0.0):
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if np.any(u1 < -tol) or np.any(u2 < -tol):
        raise DomainError("negative volume fraction")
    if np.any(u1 + u2 > 1.0 + tol):
        raise DomainError("occupied fraction u1 + u2 exceeds one")
    return u1, u2


def _check_interior(u1, u2):
    u1, u2 = _check_admissible(u1, u2)
    if np.any(u1 <= 0.0) or np.any(u2 <= 0.0) or np.any(u1 + u2 >= 1.0):
        raise SingularStateError(
            "state on the boundary of the admissible set; "
            "strictly interior fractions required"
        )
    return u1, u2


def _xlogx(x):
    # 0 log 0 := 0, kept NaN-free for vector inputs
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0.0, x, 1.0)
    return np.where(x > 0.0, x * np.log(safe), 0.0)


def entropy_density(u1, u2):
    """Entropy h(u) = sum over {u1, u2, u0} of u (log u - 1).

    Accepts scalars or arrays; boundary states are fine because
    x log x extends continuously by 0 at x = 0.
    """
    u1, u2 = _check_admissible(u1, u2)
    u0 = 1.0 - u1 - u2
    val = _xlogx(u1) - u1 + _xlogx(u2) - u2 + _xlogx(u0) - u0
    return float(val) if val.ndim == 0 else val


def free_energy(u1, u2, params, grid):
    """Free energy E = int (h(u) - u1 V1 - u2 V2) dx by the midpoint rule."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.shape != (grid.m,) or u2.shape != (grid.m,):
        raise ValueError("fields and grid disagree on the cell count")
    v1 = params.V1.value_at_centers(grid)
    v2 = params.V2.value_at_centers(grid)
    integrand = entropy_density(u1, u2) - u1 * v1 - u2 * v2
    return grid.h * float(np.sum(integrand))


def diffusion_matrix(u1, u2, params):
    """Cross-diffusion matrix A(u) of the flux pair, as a 2x2 array."""
    _check_admissible(u1, u2)
    return np.array([
        [params.D1 * (1.0 - u2), params.D1 * u1],
        [params.D2 * u2, params.D2 * (1.0 - u1)],
    ])

def entropy_hessian(u1, u2):
    """Hessian of the entropy density, h''(u); needs a strictly interior state."""
    _check_interior(u1, u2)
    u0 = 1.0 - u1 - u2
    r0 = 1.0 / u0
    return np.array([
        [1.0 / u1 + r0, r0],
        [r0, 1.0 / u2 + r0],
    ])


def quadratic_form_sides(u1, u2, z1, z2, params):
    """Both sides of the coercivity bound z . h''(u) A(u) z >= rhs(u, z).

    The right-hand side is the exact decomposition

        rhs = c u0 (z1^2/u1 + z2^2/u2) + c (1/u0 + 1) (z1 + z2)^2 + extra,

    with c = min(D1, D2) and a remainder proportional to |D2 - D1| that
    completes a square in the species with the larger diffusivity:

        extra = (D2 - D1) (u2/u0) (z1 + (1 - u1)/u2 z2)^2   if D2 >= D1,
        extra = (D1 - D2) (u1/u0) (z2 + (1 - u2)/u1 z1)^2   otherwise.

    All three terms are nonnegative, and lhs == rhs holds identically, so
    the form is positive definite on strictly interior states.  Returns
    the tuple (lhs, rhs).
    """
    _check_interior(u1, u2)
    D1, D2 = params.D1, params.D2
    u0 = 1.0 - u1 - u2
    z = np.array([z1, z2], dtype=float)
    lhs = float(z @ entropy_hessian(u1, u2) @ diffusion_matrix(u1, u2, params) @ z)

    c = min(D1, D2)
    rhs = c * u0 * (z1 * z1 / u1 + z2 * z2 / u2)
    rhs += c * (1.0 / u0 + 1.0) * (z1 + z2) ** 2
    if D2 >= D1:
        rhs += (D2 - D1) * (u2 / u0) * (z1 + (1.0 - u1) / u2 * z2) ** 2
    else:
        rhs += (D1 - D2) * (u1 / u0) * (z2 + (1.0 - u2) / u1 * z1) ** 2
    return lhs, float(rhs)


def entropy_variables(u1, u2):
    """Entropy variables w_i = log(u_i / u0) of a strictly interior state."""
    u1a, u2a = _check_interior(u1, u2)
    u0 = 1.0 - u1a - u2a
    w1 = np.log(u1a / u0)
    w2 = np.log(u2a / u0)
    if w1.ndim == 0:
        return float(w1), float(w2)
    return w1, w2


def inverse_entropy_variables(w1, w2, v1=0.0, v2=0.0):
    """Map entropy variables (plus optional potential shifts) back to fractions.

    Computes u_i = exp(w_i + v_i) / (1 + exp(w1 + v1) + exp(w2 + v2)) through
    a max-shifted form, so any finite w yields a strictly interior state
    without overflow.
    """
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    a1 = w1 + v1
    a2 = w2 + v2
    m = np.maximum(0.0, np.maximum(a1, a2))
    e0 = np.exp(-m)
    e1 = np.exp(a1 - m)
    e2 = np.exp(a2 - m)
    den = e0 + e1 + e2
    u1 = e1 / den
    u2 = e2 / den
    # strict interiority survives rounding only up to |w + v| ~ 36; past
    # that, nudge saturated outputs to the nearest representable interior pair
    tiny = np.finfo(float).tiny
    u1 = np.maximum(u1, tiny)
    u2 = np.maximum(u2, tiny)
    total = u1 + u2
    # 8 ulps of headroom so the re-rounded sum stays below one
    scale = np.where(total >= 1.0, (1.0 - 8.0 * np.finfo(float).epsneg) / total,
                     1.0)
    u1 = u1 * scale
    u2 = u2 * scale
    if u1.ndim == 0:
        return float(u1), float(u2)
    return u1, u2


def boundary_fluxes(u1_left, u2_left, u1_right, u2_right,
                    lambda_n, lambda_s, params):
    """Reservoir exchange fluxes (J1_0, J1_1, J2_0, J2_1).

    J1_0 and J1_1 are the species-1 fluxes through x = 0 and x = 1;
    J2_0, J2_1 the species-2 ones.  Signs follow the outward orientation
    of the flux field itself: positive values transport mass rightward.
    """
    _check_admissible(u1_left, u2_left)
    _check_admissible(u1_right, u2_right)
    if not (0.0 <= lambda_n <= params.lambda_n_max):
        raise DomainError("lambda_n outside [0, lambda_n_max]")
    if not (0.0 <= lambda_s <= params.lambda_s_max):
        raise DomainError("lambda_s outside [0, lambda_s_max]")
    u0_left = 1.0 - u1_left - u2_left
    u0_right = 1.0 - u1_right - u2_right
    occ_n = lambda_n / params.lambda_n_max
    occ_s = lambda_s / params.lambda_s_max
    j1_0 = params.alpha1 * occ_s * u0_left
    j1_1 = params.beta1 * (1.0 - occ_n) * u0_right * u1_right
    j2_0 = -params.beta2 * (1.0 - occ_s) * u0_left * u2_left
    j2_1 = -params.alpha2 * occ_n * u0_right
    return j1_0, j1_1, j2_0, j2_1
