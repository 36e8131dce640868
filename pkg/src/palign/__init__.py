"""Simulation and verification lab for singular nonlinear velocity alignment.

Particle runs, measure-level diagnostics (bounded-Lipschitz metric,
local fields, monokineticity), closed-form two-particle oracles and
mean-field convergence studies, behind a small CLI.
"""

from .backend import BACKEND
from .diagnostics import (
    ClusterReport,
    DiagnosticsRecord,
    cluster_norms,
    dissipation_Dalpha,
    dissipation_Dp,
    energy_balance_residual,
    kinetic_energy,
    max_position,
    max_speed,
    min_pair_dist,
    momentum,
)
from .errors import (
    CollisionError,
    DegenerateSupportError,
    DomainError,
    EmptyClusterError,
    LPInfeasibleError,
    NonFiniteError,
    PalignError,
    SolverToleranceError,
    StepStallError,
)
from .integrator import (
    AdaptiveStepper,
    IntegratorConfig,
    Trajectory,
    TrajectoryEvent,
    TrajectorySample,
    run,
    step_adaptive,
)
from .meanfield import (
    ConvergenceReport,
    InitialDataSpec,
    atomize,
    convergence_study,
    energy_inequality_check,
    weak_residual_kinetic,
    weak_residual_macro,
)
from .measures import (
    AtomicMeasure,
    FlatResult,
    LocalField,
    dbl_distance,
    empirical,
    flat_distance,
    local_field,
    marginal_x,
    monokineticity_W,
    mp_check,
    pushforward_T,
    sf_measure,
)
from .model import ModelParams, ParticleState, PhaseDerivative, pairwise_force, rhs

__version__ = "0.1.0"
