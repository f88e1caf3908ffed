"""Expected latency under public signals, signal-aware tolls and benefit bounds.

Given a signal, users route as in the deterministic game with the posterior
mean coefficients, and the expected total latency equals the deterministic
total latency at those means.  Every quantity below is therefore a weighted
sum of deterministic solves, one per nonempty cell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beliefs import (
    GAUSSIAN,
    BoxSupport,
    MonteCarloConfig,
    PosteriorSummary,
    Prior,
    SignallingPolicy,
    draw_pool,
    posterior_summaries,
    prior_mean,
    uniform_grid_policy,
)
from .game import AssumptionReport, Flow, Network, check_assumption, total_latency
from .solvers import SolverConfig, SolverError, nash_flow, optimal_flow


@dataclass(frozen=True)
class SignalOutcome:
    label: object
    probability: float
    expected_coeffs: np.ndarray
    flow: Flow
    latency: float
    tolls: np.ndarray | None = None


@dataclass(frozen=True)
class BoundConstants:
    rho0_minus: float
    rho1_minus: float
    rho_plus: float
    theta: float
    xi: float
    assumption: AssumptionReport


@dataclass(frozen=True)
class BenefitReport:
    baseline_latency: float
    signalled_latency: float
    benefit: float
    tolled: bool
    bound_value: float
    certified: bool
    per_signal: tuple[SignalOutcome, ...]
    stderr: float = 0.0


def equilibrium_latency(network: Network, alpha, tolled: bool, solver: SolverConfig | None = None) -> float:
    """Total latency of the Nash flow, or of the optimal flow when tolls are in force."""
    result = (optimal_flow if tolled else nash_flow)(network, alpha, solver)
    return total_latency(network, alpha, result.flow)


def tolls_for_flow(network: Network, expected_coeffs, x) -> np.ndarray:
    x = np.asarray(getattr(x, "per_edge", x), dtype=float)
    degrees = network.degree_array
    return (np.power(x[:, None], degrees) * (degrees * np.asarray(expected_coeffs, dtype=float))).sum(axis=1)


def optimal_tolls(network: Network, expected_coeffs, solver: SolverConfig | None = None) -> np.ndarray:
    """Per-edge constant tolls sum_d d * coeff[e, d] * x_e**d at the optimal flow x."""
    x = optimal_flow(network, expected_coeffs, solver).flow
    return tolls_for_flow(network, expected_coeffs, x)


def _solve_cell(network, summary: PosteriorSummary, tolled, solver):
    alpha = summary.expected_coeffs
    try:
        result = (optimal_flow if tolled else nash_flow)(network, alpha, solver)
    except SolverError as exc:
        raise SolverError(f"cell {summary.label!r}: {exc}", best=exc.best) from exc
    tolls = tolls_for_flow(network, alpha, result.flow) if tolled else None
    return SignalOutcome(
        summary.label,
        summary.cell_probability,
        alpha,
        result.flow,
        total_latency(network, alpha, result.flow),
        tolls,
    )


def expected_latency_under_policy(
    network: Network,
    prior: Prior,
    policy: SignallingPolicy,
    tolled: bool,
    solver: SolverConfig | None = None,
    mc: MonteCarloConfig | None = None,
    pool: np.ndarray | None = None,
    summaries: list[PosteriorSummary] | None = None,
) -> tuple[float, tuple[SignalOutcome, ...]]:
    if summaries is None:
        summaries = posterior_summaries(prior, policy, mc, pool)
    outcomes = tuple(_solve_cell(network, s, tolled, solver) for s in summaries)
    # fold in cell order so the value does not depend on how cells were solved
    value = 0.0
    for o in outcomes:
        value += o.probability * o.latency
    return value, outcomes


def bound_constants(network: Network, support: BoxSupport) -> BoundConstants:
    """Constants of the untolled (theta) and tolled (xi) benefit bounds.

    Without a linear term, or with a zero linear floor, both are infinite.
    """
    low, high = support.low, support.high
    degrees = network.degree_array
    rho0 = float(low[:, network.degree_index(0)].min()) if 0 in network.degrees else 0.0
    rho1 = float(low[:, network.degree_index(1)].min()) if 1 in network.degrees else 0.0
    rho_plus = float(((degrees + 1) * high).sum(axis=1).max())
    n_deg, n_edge = len(degrees), network.edge_count
    if rho1 > 0:
        spread = rho_plus - rho0
        theta = n_deg + spread / (2 * rho1) * (n_edge + n_deg - 1)
        xi = n_deg + spread / (4 * rho1) * (n_edge + sum((d + 1) ** d for d in network.degrees if d != 0))
    else:
        theta = xi = float("inf")
    return BoundConstants(rho0, rho1, rho_plus, theta, xi, check_assumption(network, low))


def uncertainty_radius(mean, support: BoxSupport) -> float:
    """Euclidean distance from the prior mean to the low support corner."""
    return float(np.linalg.norm(np.asarray(mean, dtype=float) - support.low))


def bound_value(constant: float, radius: float) -> float:
    return 0.0 if radius == 0 else constant * radius


def _latency_gradient(network, alpha, flow, tolled, index, solver):
    """Gradient of equilibrium total latency w.r.t. the flat coordinates ``index``."""
    if tolled:
        # envelope theorem: d/d alpha[e, d] of min_f L = x_e ** (d + 1)
        x = np.asarray(flow.per_edge)
        return np.power(x[:, None], network.degree_array + 1.0).ravel()[index]
    grad = np.empty(len(index))
    base = np.asarray(alpha, dtype=float).ravel()
    for n, j in enumerate(index):
        h = 1e-5 * max(1.0, abs(base[j]))
        up, down = base.copy(), base.copy()
        up[j] += h
        lo = max(base[j] - h, 0.0)
        down[j] = lo
        f_up = equilibrium_latency(network, up.reshape(network.shape), False, solver)
        f_down = equilibrium_latency(network, down.reshape(network.shape), False, solver)
        grad[n] = (f_up - f_down) / (base[j] + h - lo)
    return grad


def _influence(network, prior, pool, policy, outcomes, tolled, solver):
    """Per-sample linearization of sum_i p_i L(mean_i) around the cell means."""
    index = prior.support.random_index
    cells = policy.assign(pool)
    by_label = {o.label: o for o in outcomes}
    g = np.empty(len(pool))
    for i, label in enumerate(policy.labels):
        mask = cells == i
        if not mask.any():
            continue
        o = by_label[label]
        grad = _latency_gradient(network, o.expected_coeffs, o.flow, tolled, index, solver)
        centre = o.expected_coeffs.ravel()[index]
        g[mask] = o.latency + (pool[mask] - centre) @ grad
    return g


def benefit(
    network: Network,
    prior: Prior,
    policy: SignallingPolicy,
    tolled: bool,
    solver: SolverConfig | None = None,
    mc: MonteCarloConfig | None = None,
    pool: np.ndarray | None = None,
    baseline: tuple[float, tuple[SignalOutcome, ...]] | None = None,
    with_stderr: bool = True,
) -> BenefitReport:
    """Reduction in expected total latency from announcing the cell of ``policy``.

    The baseline reveals nothing (one cell covering the support).  For
    Monte Carlo priors both sides use the same sample pool and ``stderr`` is
    a delta-method standard error of the benefit.
    """
    if prior.kind == GAUSSIAN and pool is None:
        pool = draw_pool(prior, mc)
    trivial = uniform_grid_policy(prior.support, 1)
    if baseline is None:
        baseline = expected_latency_under_policy(network, prior, trivial, tolled, solver, mc, pool)
    base_value, base_outcomes = baseline
    value, outcomes = expected_latency_under_policy(network, prior, policy, tolled, solver, mc, pool)

    stderr = 0.0
    if prior.kind == GAUSSIAN and with_stderr and prior.dimension > 0:
        diff = _influence(network, prior, pool, trivial, base_outcomes, tolled, solver) - _influence(
            network, prior, pool, policy, outcomes, tolled, solver
        )
        stderr = float(diff.std(ddof=1) / np.sqrt(len(pool)))

    constants = bound_constants(network, prior.support)
    radius = uncertainty_radius(prior_mean(prior, mc, pool), prior.support)
    return BenefitReport(
        baseline_latency=base_value,
        signalled_latency=value,
        benefit=base_value - value,
        tolled=tolled,
        bound_value=bound_value(constants.xi if tolled else constants.theta, radius),
        certified=constants.assumption.holds,
        per_signal=outcomes,
        stderr=stderr,
    )


def lipschitz_probe(network: Network, a, b, tolled: bool, solver: SolverConfig | None = None) -> float:
    """Difference quotient (L(a) - L(b)) / ||a - b|| of equilibrium total latency."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    distance = float(np.linalg.norm(a - b))
    if distance == 0:
        raise ValueError("probe points must differ")
    return (equilibrium_latency(network, a, tolled, solver) - equilibrium_latency(network, b, tolled, solver)) / distance
