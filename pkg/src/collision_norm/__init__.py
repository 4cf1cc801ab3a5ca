"""Collision-force bounds for linear interactive-robot models via the Sobolev system norm."""
from .errors import *  # noqa: F401,F403
from .lti import (
    ImpulseResponse,
    RationalTF,
    StateSpace,
    close_state_feedback,
    evaluate,
    relative_degree,
    simulate_impulse,
    tf_add,
    tf_mul,
    tf_to_ss,
)
from .matlib import SolverSettings, cholesky, expm, is_hurwitz, lu_solve, lyapunov_solve, solve_care
from .models import (
    LQR,
    REFERENCE_ROBOT,
    AdmittanceParams,
    DampedInertia,
    Grounded,
    NoControl,
    NoMotor,
    PDTorque,
    RobotParams,
    StateFeedback,
    build_estimation,
    build_grounded,
    build_inertial,
    build_manutec,
)
from .norms import appendix_inequality_check, h2_norm_sq, signal_sobolev, sobolev_norm
from .synthesis import kalman_steady_covariance, lqr_gain

__version__ = "0.1.0"
