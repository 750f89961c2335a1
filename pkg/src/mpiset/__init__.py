"""Certified inner approximations of maximal positively invariant sets of
polynomial ODEs, via a hierarchy of sum-of-squares tightenings."""

from .polynomials import (
    Polynomial,
    PolynomialParseError,
    lie_derivative,
    parse_polynomial,
)
from .sets import Membership, SemialgebraicSet
from .moments import MomentVector, ball_moment, basis, box_moment, moment_vector
from .sos import PolyExpr, SdpProblem, SosProgram
from .solver import SdpSolution, SdpStatus, SolverOptions, solve
from .hierarchy import (
    Certificate,
    HierarchyRun,
    OdeSystem,
    build_tightening,
    inner_set_membership,
    run_hierarchy,
    solve_tightening,
)
from .validation import (
    TrajectoryResult,
    ValidationConfig,
    ValidationReport,
    estimate_avg_exit_time,
    estimate_volume,
    integrate,
    validate_certificate,
)
from .config import ConfigError, RunConfig

__version__ = "0.1.0"

__all__ = [
    "Polynomial",
    "PolynomialParseError",
    "lie_derivative",
    "parse_polynomial",
    "Membership",
    "SemialgebraicSet",
    "MomentVector",
    "ball_moment",
    "basis",
    "box_moment",
    "moment_vector",
    "PolyExpr",
    "SdpProblem",
    "SosProgram",
    "SdpSolution",
    "SdpStatus",
    "SolverOptions",
    "solve",
    "Certificate",
    "HierarchyRun",
    "OdeSystem",
    "build_tightening",
    "inner_set_membership",
    "run_hierarchy",
    "solve_tightening",
    "TrajectoryResult",
    "ValidationConfig",
    "ValidationReport",
    "estimate_avg_exit_time",
    "estimate_volume",
    "integrate",
    "validate_certificate",
    "ConfigError",
    "RunConfig",
    "__version__",
]
