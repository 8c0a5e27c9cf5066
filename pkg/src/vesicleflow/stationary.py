"""Stationary-state relations: reservoir fixed points, the vanishing-flux
dichotomy, and symmetric configurations.

At a steady state the constant species fluxes satisfy J1 = -J2 = J with

    J = alpha1 beta2 u2(0) / (beta2 u2(0) + alpha1) * u0(0)
      = alpha2 beta1 u1(1) / (beta1 u1(1) + alpha2) * u0(1),

so (provided the void traces stay positive) J vanishes exactly when the
outgoing trace of either species vanishes: u1(1) = 0 iff u2(0) = 0 iff
J = 0.  When the two species see mirrored parameters (equal rates,
capacities and diffusivities, V2(x) = V1(1-x) + const) the whole system
is invariant under x -> 1-x combined with the species swap, and the
dynamics preserves u2(x, t) = u1(1-x, t) along with Lambda_n = Lambda_s.
"""

import numpy as np

from . import fv, model, newton, timeloop
from .errors import SingularStateError

__all__ = ["stationary_pool_values", "vanishing_flux_predicate",
           "symmetric_config"]


def stationary_pool_values(u1_right, u2_left, params):
    """Normalized reservoir occupancies (Ln/Ln_max, Ls/Ls_max) at which the
    reservoir equations vanish, from the boundary traces."""
    den_n = params.beta1 * u1_right + params.alpha2
    den_s = params.beta2 * u2_left + params.alpha1
    if den_n == 0.0 or den_s == 0.0:
        raise SingularStateError(
            "reservoir fixed point undefined: vanishing denominator "
            f"(beta1 u1(1) + alpha2 = {den_n:g}, beta2 u2(0) + alpha1 = {den_s:g})")
    occ_n = params.beta1 * u1_right / den_n
    occ_s = params.beta2 * u2_left / den_s
    return occ_n, occ_s


def vanishing_flux_predicate(summary, params, tol):
    """Consistency of a steady state with the flux dichotomy.

    Evaluates the two closed-form expressions for the stationary flux
    from the traces in `summary` and checks that they agree within `tol`
    and that the three smallness flags u1(1) <= tol, u2(0) <= tol,
    |J| <= tol are all equal.  Returns True when the state is consistent.
    Raises when a void trace is <= tol, where the dichotomy is vacuous.
    """
    if summary.u0_left <= tol or summary.u0_right <= tol:
        raise SingularStateError(
            "vanishing-flux dichotomy inapplicable: void trace not bounded "
            f"away from zero (u0(0) = {summary.u0_left:g}, "
            f"u0(1) = {summary.u0_right:g})")
    den_s = params.beta2 * summary.u2_left + params.alpha1
    den_n = params.beta1 * summary.u1_right + params.alpha2
    j_from_left = (params.alpha1 * params.beta2 * summary.u2_left / den_s
                   * summary.u0_left) if den_s > 0.0 else 0.0
    j_from_right = (params.alpha2 * params.beta1 * summary.u1_right / den_n
                    * summary.u0_right) if den_n > 0.0 else 0.0
    flags = (summary.u1_right <= tol,
             summary.u2_left <= tol,
             abs(summary.flux) <= tol)
    consistent = (flags[0] == flags[1] == flags[2]
                  and abs(j_from_left - j_from_right) <= tol)
    return bool(consistent)


def symmetric_config(alpha, beta, diffusivity, lambda_max, lambda0, v_slope,
                     u_init, m, tau, t_end, newton_config=None, **kwargs):
    """Simulation config whose two species are mirror images of each other.

    Both species get the same rates, diffusivity, capacity and initial
    reservoir content; V1(x) = v_slope * x and V2(x) = -v_slope * x (equal
    to V1(1-x) up to a constant).  `u_init` is either a scalar (uniform
    fill for both species) or a species-1 cell profile whose reflection
    seeds species 2.  Extra keyword arguments pass through to
    :class:`timeloop.SimulationConfig`.
    """
    params = model.ModelParameters(
        alpha1=alpha, alpha2=alpha, beta1=beta, beta2=beta,
        D1=diffusivity, D2=diffusivity,
        lambda_n_max=lambda_max, lambda_s_max=lambda_max,
        V1=model.Potential.linear(v_slope),
        V2=model.Potential.linear(-v_slope),
    )
    grid = fv.Grid(m)
    if np.ndim(u_init) == 0:
        initial = timeloop.InitialCondition(
            "uniform", u1=float(u_init), u2=float(u_init),
            lambda_n=lambda0, lambda_s=lambda0)
    else:
        profile = np.asarray(u_init, dtype=float)
        if profile.shape != (m,):
            raise ValueError("u_init profile must have one value per cell")
        initial = _ProfileInitial(profile, profile[::-1].copy(), lambda0, lambda0)
    return timeloop.SimulationConfig(
        params=params,
        grid=grid,
        tau=tau,
        t_end=t_end,
        initial=initial,
        newton=newton_config or newton.NewtonConfig(),
        **kwargs,
    )


class _ProfileInitial:
    """Initial condition from explicit cell profiles."""

    def __init__(self, u1, u2, lambda_n, lambda_s):
        self.kind = "profile"
        self.u1_profile = u1
        self.u2_profile = u2
        self.lambda_n = float(lambda_n)
        self.lambda_s = float(lambda_s)

    def cell_averages(self, grid):
        if self.u1_profile.shape != (grid.m,):
            raise ValueError("profile length does not match the grid")
        return self.u1_profile.copy(), self.u2_profile.copy()
