"""Simulation and exact-computation toolkit for long-range percolation on Z^d.

The measure attaches an edge between distinct vertices u, v with probability
1 - exp(-beta * J(u, v)), where J integrates ||x - y||^(-2d) over the unit
boxes centered at u and v.  Vertices at L-infinity distance 1 are always
connected.  The package provides exact kernel evaluation, samplers, graph
distance computations, exact finite-model enumeration, Monte Carlo
estimators for the distance growth exponent, and a command line interface
for the standard experiment suites.
"""

from .errors import (
    CapacityError,
    ConfigError,
    InvalidInputError,
    InvariantViolationError,
    NumericError,
    PerclrError,
)
from .kernel import (
    block_kernel_sum,
    connection_prob,
    connection_prob_derivative,
    expected_degree,
    kernel_integral,
    one_dim_kernel,
)
from .sampling import (
    Configuration,
    MeasureSpec,
    chi_augment,
    coupled_sweep,
    edge_uniform,
    sample_continuum,
    sample_direct,
    sample_fast,
    stream_seed,
)
from .graphs import (
    BoxGraph,
    bfs_distance,
    corner_distance,
    count_cut_points,
    cutpoint_mean_exact,
    diameter,
    indirect_distance,
)
from .exact_enumeration import (
    FiniteModel,
    Functional,
    default_russo_suite,
    distance_functional,
    exact_expectation,
    lambda_small_beta_derivative,
    russo_derivative,
    verify_russo,
)
from .estimators import (
    LambdaEstimate,
    SweepReport,
    TelescopeTerm,
    ThetaEstimate,
    continuity_telescope,
    estimate_corner_distance,
    estimate_lambda_full,
    monotone_sweep,
    theta_inf,
    theta_slope,
)

__version__ = "0.1.0"

__all__ = [
    "BoxGraph",
    "CapacityError",
    "ConfigError",
    "Configuration",
    "FiniteModel",
    "Functional",
    "InvalidInputError",
    "InvariantViolationError",
    "LambdaEstimate",
    "MeasureSpec",
    "NumericError",
    "PerclrError",
    "SweepReport",
    "TelescopeTerm",
    "ThetaEstimate",
    "bfs_distance",
    "block_kernel_sum",
    "chi_augment",
    "connection_prob",
    "connection_prob_derivative",
    "continuity_telescope",
    "corner_distance",
    "count_cut_points",
    "coupled_sweep",
    "cutpoint_mean_exact",
    "default_russo_suite",
    "diameter",
    "distance_functional",
    "edge_uniform",
    "estimate_corner_distance",
    "estimate_lambda_full",
    "exact_expectation",
    "expected_degree",
    "indirect_distance",
    "kernel_integral",
    "lambda_small_beta_derivative",
    "monotone_sweep",
    "one_dim_kernel",
    "russo_derivative",
    "sample_continuum",
    "sample_direct",
    "sample_fast",
    "stream_seed",
    "theta_inf",
    "theta_slope",
    "verify_russo",
    "__version__",
]
