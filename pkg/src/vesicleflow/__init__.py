"""Finite-volume solver for two-species cross-diffusion transport between
axonal reservoirs, with an entropy structure, implicit time stepping, and
a hopping-lattice cross-check model.

The packed unknown layout, grid conventions and the numerical scheme are
documented in :mod:`vesicleflow.fv`; the continuous model in
:mod:`vesicleflow.model`.
"""

from .errors import (ConfigError, DomainError, LinearSolverError, NewtonError,
                     SingularStateError, SolverError, TimeStepError,
                     VesicleFlowError)
from .fv import Grid, pack, unpack
from .model import ModelParameters, Potential
from .newton import NewtonConfig, NewtonReport
from .timeloop import (InitialCondition, SimulationConfig, SteadySummary,
                       TrajectoryRecord, conserved_total, run,
                       stationary_pools_check, steady_state_detect)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "LinearSolverError", "NewtonError",
    "SingularStateError", "SolverError", "TimeStepError", "VesicleFlowError",
    "Grid", "pack", "unpack", "ModelParameters", "Potential",
    "NewtonConfig", "NewtonReport", "InitialCondition", "SimulationConfig",
    "SteadySummary", "TrajectoryRecord", "conserved_total", "run",
    "stationary_pools_check", "steady_state_detect", "__version__",
]
