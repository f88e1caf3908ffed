"""Signalling and tolling in parallel Bayesian congestion games."""
__version__ = "0.1.0"

from .analysis import (
    BenefitReport,
    BoundConstants,
    SignalOutcome,
    benefit,
    bound_constants,
    equilibrium_latency,
    expected_latency_under_policy,
    lipschitz_probe,
    optimal_tolls,
)
from .beliefs import (
    BoxSupport,
    EstimationError,
    MonteCarloConfig,
    PosteriorSummary,
    Prior,
    SignallingPolicy,
    draw_pool,
    posterior_summaries,
    prior_mean,
    uniform_grid_policy,
)
from .game import (
    AssumptionReport,
    Flow,
    Network,
    check_assumption,
    coefficients,
    edge_latency,
    latencies,
    marginal_cost,
    normalize_demand,
    total_latency,
)
from .solvers import (
    EquilibriumResult,
    SolverConfig,
    SolverError,
    brute_force_best_flow,
    nash_flow,
    optimal_flow,
)
