"""Robust least squares over subspace uncertainty balls, with behavioral
identification and data-driven receding-horizon tracking on top."""

from ._backend import available_backends, backend_name
from .behavior import (
    BehaviorEstimate,
    Trajectory,
    behavior_dimension,
    gpe_check,
    hankel,
    identify_subspace,
    lag,
)
from .control import (
    ClosedLoopLog,
    ControlConfig,
    LtiSystem,
    NoiseModel,
    assemble_problem,
    default_config,
    double_integrator,
    identify_offline,
    laplacian3,
    nominal_controller,
    receding_horizon,
    simulate,
)
from .manifold import (
    Projector,
    StiefelPoint,
    SubspaceBall,
    chordal_distance,
    gap_distance,
    orthonormalize,
    projector,
    tangent_project,
)
from .solver import (
    FactoredSymmetric,
    InnerSolution,
    RobustLsqProblem,
    SolverOptions,
    SolverResult,
    build_A,
    cost,
    find_lambda,
    grad_x,
    solve,
    structured_top_k,
    top_k_eigs,
)

__version__ = "0.1.0"
