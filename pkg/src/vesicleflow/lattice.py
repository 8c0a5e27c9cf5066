"""Hopping-lattice model the continuum equations arise from; used as an
independent cross-check oracle for the finite-volume solver.

Sites j = 0..m-1 sit at the cell centers x_j = (j + 1/2) h of the
matching finite-volume grid.  A vesicle of species i hops from site j to
a free neighbor at rate u_{i,j} u_{0,target} exp(-eta_i (V_i(source) -
V_i(target))), i.e. jumps toward higher potential are enhanced.  Sites
evolve by

    gamma_i h^2 du_{i,j}/dt =
        - u_{i,j} u_{0,j-1} e^{-eta_i (V_j - V_{j-1})}
        + u_{i,j-1} u_{0,j} e^{-eta_i (V_{j-1} - V_j)}
        - u_{i,j} u_{0,j+1} e^{-eta_i (V_j - V_{j+1})}
        + u_{i,j+1} u_{0,j} e^{-eta_i (V_{j+1} - V_j)},

with missing-neighbor terms dropped at the two ends, where the reservoir
exchanges enter scaled by h (one-sided boundary terms):

    gamma_1 h du_{1,0}/dt   += a1 (Ls/Ls_max) u_{0,0}
    gamma_2 h du_{2,0}/dt   -= b2 (1 - Ls/Ls_max) u_{0,0} u_{2,0}
    gamma_1 h du_{1,m-1}/dt -= b1 (1 - Ln/Ln_max) u_{0,m-1} u_{1,m-1}
    gamma_2 h du_{2,m-1}/dt += a2 (Ln/Ln_max) u_{0,m-1}

and the reservoirs absorb exactly what the boundary sites emit, so
h * sum(u1 + u2) + Ln + Ls is conserved by the right-hand side.  With
eta_i = 1/2, D_i = 1/gamma_i, alpha_i = a_i D_i and beta_i = b_i D_i the
diffusive limit h -> 0 recovers the continuum model.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LatticeState", "lattice_rhs", "lattice_integrate", "stable_dt"]


@dataclass
class LatticeState:
    """Site occupancies, reservoir contents, and the hopping constants."""
    u1: np.ndarray
    u2: np.ndarray
    lambda_n: float
    lambda_s: float
    gamma1: float
    gamma2: float
    a1: float
    a2: float
    b1: float
    b2: float
    lambda_n_max: float
    lambda_s_max: float
    eta1: float = 0.5
    eta2: float = 0.5

    def __post_init__(self):
        self.u1 = np.asarray(self.u1, dtype=float)
        self.u2 = np.asarray(self.u2, dtype=float)
        if self.u1.shape != self.u2.shape or self.u1.ndim != 1 or self.u1.size < 2:
            raise ValueError("u1 and u2 must be equal-length 1-d arrays, m >= 2")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ValueError("hopping time scales gamma must be positive")

    @classmethod
    def from_continuum(cls, params, u1, u2, lambda_n, lambda_s):
        """Match a continuum parameter set: gamma_i = 1/D_i, a_i = alpha_i/D_i,
        b_i = beta_i/D_i, eta_i = 1/2."""
        return cls(
            u1=u1, u2=u2, lambda_n=lambda_n, lambda_s=lambda_s,
            gamma1=1.0 / params.D1, gamma2=1.0 / params.D2,
            a1=params.alpha1 / params.D1, a2=params.alpha2 / params.D2,
            b1=params.beta1 / params.D1, b2=params.beta2 / params.D2,
            lambda_n_max=params.lambda_n_max, lambda_s_max=params.lambda_s_max,
        )

    @property
    def m(self):
        return self.u1.size

    def copy(self):
        return LatticeState(
            u1=self.u1.copy(), u2=self.u2.copy(),
            lambda_n=self.lambda_n, lambda_s=self.lambda_s,
            gamma1=self.gamma1, gamma2=self.gamma2,
            a1=self.a1, a2=self.a2, b1=self.b1, b2=self.b2,
            lambda_n_max=self.lambda_n_max, lambda_s_max=self.lambda_s_max,
            eta1=self.eta1, eta2=self.eta2,
        )


def _site_potentials(state, h, potentials):
    x = (np.arange(state.m) + 0.5) * h
    v1_pot, v2_pot = potentials
    if callable(v1_pot):
        return v1_pot(x), v2_pot(x)
    # Potential objects from the continuum model
    class _G:  # minimal grid shim for Potential.value_at_centers
        pass
    g = _G()
    g.m = state.m
    g.h = h
    g.cell_centers = lambda: x
    return v1_pot.value_at_centers(g), v2_pot.value_at_centers(g)


def _species_exchange(u, u0, v, eta, gamma, h):
    """Interior hopping contribution to du/dt for one species."""
    du = np.zeros_like(u)
    # pairwise exchange across the m-1 interior bonds
    dv = v[1:] - v[:-1]
    to_right = u[:-1] * u0[1:] * np.exp(-eta * (v[:-1] - v[1:]))
    to_left = u[1:] * u0[:-1] * np.exp(-eta * (v[1:] - v[:-1]))
    net = to_right - to_left  # bond flux, left site to right site
    du[:-1] -= net
    du[1:] += net
    return du / (gamma * h * h)


def lattice_rhs(state, h, potentials):
    """Time derivatives (du1, du2, dlambda_n, dlambda_s)."""
    v1, v2 = _site_potentials(state, h, potentials)
    u0 = 1.0 - state.u1 - state.u2
    du1 = _species_exchange(state.u1, u0, v1, state.eta1, state.gamma1, h)
    du2 = _species_exchange(state.u2, u0, v2, state.eta2, state.gamma2, h)
    occ_n = state.lambda_n / state.lambda_n_max
    occ_s = state.lambda_s / state.lambda_s_max
    in1 = state.a1 * occ_s * u0[0]
    out2 = state.b2 * (1.0 - occ_s) * u0[0] * state.u2[0]
    out1 = state.b1 * (1.0 - occ_n) * u0[-1] * state.u1[-1]
    in2 = state.a2 * occ_n * u0[-1]
    du1[0] += in1 / (state.gamma1 * h)
    du2[0] -= out2 / (state.gamma2 * h)
    du1[-1] -= out1 / (state.gamma1 * h)
    du2[-1] += in2 / (state.gamma2 * h)
    dln = out1 / state.gamma1 - in2 / state.gamma2
    dls = out2 / state.gamma2 - in1 / state.gamma1
    return du1, du2, dln, dls


def stable_dt(state, h, safety=0.5):
    """Conservative explicit-Euler step bound, safety * gamma_min h^2 / 4."""
    return safety * min(state.gamma1, state.gamma2) * h * h / 4.0


def lattice_integrate(state, t_end, dt, h, potentials):
    """Explicit Euler integration to t_end; returns the final state.

    ``dt = None`` picks the largest stable step that divides t_end evenly.
    Refuses step sizes above the diffusive stability bound
    gamma_min h^2 / 4, and checks site admissibility along the way, since
    a violation indicates the step is still too large for the boundary
    exchange rates.
    """
    if dt is None:
        dt = t_end / max(1, int(np.ceil(t_end / stable_dt(state, h))))
    if dt > min(state.gamma1, state.gamma2) * h * h / 4.0:
        raise ValueError(
            f"dt = {dt:g} exceeds the stability bound "
            f"{min(state.gamma1, state.gamma2) * h * h / 4.0:g}")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be an integer multiple of dt")
    s = state.copy()
    for k in range(n):
        du1, du2, dln, dls = lattice_rhs(s, h, potentials)
        s.u1 += dt * du1
        s.u2 += dt * du2
        s.lambda_n += dt * dln
        s.lambda_s += dt * dls
        if k % 64 == 0 or k == n - 1:
            if (np.any(s.u1 < -1e-9) or np.any(s.u2 < -1e-9)
                    or np.any(s.u1 + s.u2 > 1.0 + 1e-9)
                    or not -1e-9 <= s.lambda_n <= s.lambda_n_max + 1e-9
                    or not -1e-9 <= s.lambda_s <= s.lambda_s_max + 1e-9):
                raise ValueError(
                    f"lattice state left the admissible set at step {k + 1}; "
                    "reduce dt")
    return s
