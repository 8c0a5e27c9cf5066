"""Shared fixtures.

The compiled-kernel build pays a one-off jit cost; warming it up here keeps
the wall-clock assertions in the acceptance tests honest.  The desk-scale
reference run is session-scoped because four different tests assert
properties of the same trajectory.
"""

import time

import numpy as np
import pytest

from vesicleflow import fv, kernels, model, newton, timeloop


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    kernels.warmup()


def table1_params(**overrides):
    kw = dict(
        alpha1=0.2666, alpha2=0.2666, beta1=3.0, beta2=3.0,
        D1=4.0e-4, D2=4.0e-3,
        lambda_n_max=2.9e-3, lambda_s_max=0.175,
        V1=model.Potential.linear(1.75), V2=model.Potential.linear(-1.5),
    )
    kw.update(overrides)
    return model.ModelParameters(**kw)


def desk_config(m=100, tau=1e-3, t_end=10.0, tol=1e-10, max_iter=400,
                output_every=100, **param_overrides):
    """Experiment-1 setup at desk resolution."""
    return timeloop.SimulationConfig(
        params=table1_params(**param_overrides),
        grid=fv.Grid(m),
        tau=tau,
        t_end=t_end,
        initial=timeloop.InitialCondition(
            "uniform", u1=0.1, u2=0.1, lambda_n=1.5e-3, lambda_s=0.12),
        newton=newton.NewtonConfig(tol=tol, max_iter=max_iter),
        output_every=output_every,
    )


@pytest.fixture(scope="session")
def exp1_desk():
    """Desk-scale Experiment-1 trajectory plus its wall time."""
    cfg = desk_config()
    t0 = time.perf_counter()
    record = timeloop.run(cfg)
    wall = time.perf_counter() - t0
    return record, wall


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_interior_state(rng, m, margin=0.01):
    """Admissible cell fields bounded away from the domain faces."""
    u1 = rng.uniform(margin, 1.0 - 3.0 * margin, size=m)
    u2 = rng.uniform(margin, 1.0 - u1 - margin)
    return u1, u2
