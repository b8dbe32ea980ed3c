"""Invariant extended Kalman filtering on matrix Lie groups.

Group kernels for SE(2), SO(3) and SE2(3); exact invariant-error
propagation for group-affine dynamics; a generic left/right IEKF with
Riccati covariance flow; planar-car and inertial-navigation models with
their conventional EKF baselines; covariance boundedness checks; and a
deterministic simulation harness.
"""

from .errors import (
    BranchCutError,
    ModelInconsistencyError,
    NotInAlgebraError,
    NumericalFailureError,
    ProjectionError,
    UpdateSkippedError,
)
from .groups import GROUPS, SE2, SE23, SO3, MatrixLieGroup, rot2, skew, unskew
from .errordyn import (
    Dynamics,
    ErrorSide,
    LinearizedDynamics,
    check_group_affine,
    error_dynamics,
    left_error,
    linearize,
    numeric_error_jacobian,
    propagate_error_exact,
    propagate_log_linear,
    right_error,
    verify_log_linear,
)
from .filters import (
    FilterState,
    NoiseSchedule,
    ObservationModel,
    gain,
    innovation,
    joseph_update,
    lyapunov_value,
    propagate,
    update,
)
from .observability import (
    WindowReport,
    check_deyst_price,
    numerical_rank,
    rank_H_HPhi,
    transition_matrix,
)
from .sim import RunLog, Scenario, run, summarize, write_csv

__all__ = [
    "BranchCutError", "ModelInconsistencyError", "NotInAlgebraError",
    "NumericalFailureError", "ProjectionError", "UpdateSkippedError",
    "GROUPS", "SE2", "SE23", "SO3", "MatrixLieGroup", "rot2", "skew",
    "unskew",
    "Dynamics", "ErrorSide", "LinearizedDynamics", "check_group_affine",
    "error_dynamics", "left_error", "linearize", "numeric_error_jacobian",
    "propagate_error_exact", "propagate_log_linear", "right_error",
    "verify_log_linear",
    "FilterState", "NoiseSchedule", "ObservationModel", "gain",
    "innovation", "joseph_update", "lyapunov_value", "propagate", "update",
    "WindowReport", "check_deyst_price", "numerical_rank", "rank_H_HPhi",
    "transition_matrix",
    "RunLog", "Scenario", "run", "summarize", "write_csv",
]

__version__ = "0.1.0"
