"""Guaranteed time-varying bounds on means and variances of stochastic
chemical kinetics, via moment-based semidefinite programming, with exact
master-equation and simulation oracles for validation.
"""

__version__ = "0.1.0"

from .assembly import (
    BoundQuery,
    ConicProblem,
    Layout,
    ScalingMap,
    assemble_mean_bound,
    assemble_variance_bound,
    canonical_rho,
    dynamic_equality_rows,
    scale_problem,
)
from .cones import (
    AffineSymmetricBlock,
    ConeDescription,
    VectorHandle,
    cone,
    localizing_matrix,
    moment_matrix,
)
from .errors import (
    BadProbability,
    InconsistentInvariants,
    KinboundsError,
    MissingMoment,
    NetworkSyntaxError,
    NonPositiveRate,
    NoValidChoice,
    OrderOverflow,
    SingularChoice,
    StateCapExceeded,
    TooLargeForDense,
    UnknownSpecies,
    UnsupportedSense,
    ValidationError,
)
from .moments import (
    MomentDynamics,
    build_moment_odes,
    default_relaxation_order,
    moment_basis,
    shifted_monomial_delta,
)
from .network import (
    Reaction,
    ReactionNetwork,
    ReducedModel,
    invariants,
    parse_network,
    reduce,
    stoichiometry,
)
from .oracle import (
    CmeSolution,
    SsaResult,
    StateSpace,
    build_generator,
    eigenvalues,
    enumerate_states,
    initial_probability_vector,
    solve_cme,
    ssa_simulate,
    suggested_rho,
    z_quadrature,
)
from .solver import (
    INFEASIBLE,
    ITER_LIMIT,
    NUMERICAL_FAILURE,
    OPTIMAL,
    UNBOUNDED,
    SolverSolution,
    Tolerances,
    solve,
)

__all__ = [
    "__version__",
    "AffineSymmetricBlock",
    "BadProbability",
    "BoundQuery",
    "CmeSolution",
    "ConeDescription",
    "ConicProblem",
    "InconsistentInvariants",
    "INFEASIBLE",
    "ITER_LIMIT",
    "KinboundsError",
    "Layout",
    "MissingMoment",
    "MomentDynamics",
    "NetworkSyntaxError",
    "NonPositiveRate",
    "NoValidChoice",
    "NUMERICAL_FAILURE",
    "OPTIMAL",
    "OrderOverflow",
    "Reaction",
    "ReactionNetwork",
    "ReducedModel",
    "ScalingMap",
    "SingularChoice",
    "SolverSolution",
    "SsaResult",
    "StateCapExceeded",
    "StateSpace",
    "Tolerances",
    "TooLargeForDense",
    "UNBOUNDED",
    "UnknownSpecies",
    "UnsupportedSense",
    "ValidationError",
    "VectorHandle",
    "assemble_mean_bound",
    "assemble_variance_bound",
    "build_generator",
    "build_moment_odes",
    "canonical_rho",
    "cone",
    "default_relaxation_order",
    "dynamic_equality_rows",
    "eigenvalues",
    "enumerate_states",
    "initial_probability_vector",
    "invariants",
    "localizing_matrix",
    "moment_basis",
    "moment_matrix",
    "parse_network",
    "reduce",
    "scale_problem",
    "shifted_monomial_delta",
    "solve",
    "solve_cme",
    "ssa_simulate",
    "stoichiometry",
    "suggested_rho",
    "z_quadrature",
]
