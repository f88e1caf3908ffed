"""Nash and socially optimal flows on parallel networks.

Both problems reduce to a one-dimensional monotone search: pick a level
``lam``, put ``f_e(lam) = inverse of the edge's level function`` on every
edge, and bisect on ``lam`` until the masses add up to the demand.  For Nash
flows the level function is the latency; for optimal flows it is the
marginal cost, which is again a polynomial with coefficients ``(d+1)*alpha``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numba
import numpy as np

from .game import Flow, Network, total_latency

CONVERGED, COLLAPSED, MAX_ITER = 0, 1, 2


@dataclass(frozen=True)
class SolverConfig:
    residual_tolerance: float = 1e-10
    max_iterations: int = 200
    level_bracket_growth: float = 2.0
    inner_iterations: int = 100

    def __post_init__(self):
        if not self.residual_tolerance > 0:
            raise ValueError("residual_tolerance must be positive")
        if self.max_iterations < 1 or self.inner_iterations < 1:
            raise ValueError("iteration limits must be >= 1")
        if not self.level_bracket_growth > 1:
            raise ValueError("level_bracket_growth must exceed 1")


@dataclass(frozen=True)
class EquilibriumResult:
    flow: Flow
    common_level: float
    used_edges: frozenset
    iterations: int
    degenerate: bool = False


class SolverError(RuntimeError):
    """Level search failed to converge; ``best`` holds the last iterate."""

    def __init__(self, message, best: EquilibriumResult | None = None):
        super().__init__(message)
        self.best = best


@numba.njit(cache=True)
def _poly(row, degrees, x):
    s = 0.0
    for j in range(degrees.size):
        c = row[j]
        if c != 0.0:
            if degrees[j] == 0:
                s += c
            else:
                s += c * x ** degrees[j]
    return s


@numba.njit(cache=True)
def _edge_inverse(row, degrees, offset, level, cap, inner_iterations):
    # largest mass in [0, cap] whose level value stays below ``level``
    if offset + _poly(row, degrees, 0.0) >= level:
        return 0.0
    if offset + _poly(row, degrees, cap) <= level:
        return cap
    lo = 0.0
    hi = cap
    for _ in range(inner_iterations):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if offset + _poly(row, degrees, mid) < level:
            lo = mid
        else:
            hi = mid
    return lo


@numba.njit(cache=True)
def _masses(coef, degrees, offsets, level, cap, inner_iterations, out):
    total = 0.0
    for e in range(coef.shape[0]):
        out[e] = _edge_inverse(coef[e], degrees, offsets[e], level, cap, inner_iterations)
        total += out[e]
    return total


@numba.njit(cache=True)
def _used_level(coef, degrees, offsets, flows, fallback):
    # a saturated edge leaves a plateau of valid search levels; report the
    # level users actually face
    level = -np.inf
    for e in range(coef.shape[0]):
        if flows[e] > 0.0:
            level = max(level, offsets[e] + _poly(coef[e], degrees, flows[e]))
    return level if level > -np.inf else fallback


@numba.njit(cache=True)
def _level_search(coef, degrees, offsets, demand, tol, max_iterations, growth, inner_iterations):
    n = coef.shape[0]
    flows = np.zeros(n)
    upper = np.zeros(n)
    lo = np.inf
    hi = -np.inf
    for e in range(n):
        lo = min(lo, offsets[e] + _poly(coef[e], degrees, 0.0))
        hi = max(hi, offsets[e] + _poly(coef[e], degrees, demand))
    if hi <= lo:
        hi = lo + max(abs(lo), 1.0)
    while _masses(coef, degrees, offsets, hi, demand, inner_iterations, upper) < demand:
        hi = lo + (hi - lo) * growth

    iterations = 0
    while iterations < max_iterations:
        iterations += 1
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # no float strictly between lo and hi: hand the missing mass to
            # edges whose inverse jumps across the bracket, lowest index first
            below = _masses(coef, degrees, offsets, lo, demand, inner_iterations, flows)
            _masses(coef, degrees, offsets, hi, demand, inner_iterations, upper)
            deficit = demand - below
            jumping = 0
            for e in range(n):
                gap = upper[e] - flows[e]
                if gap > tol:
                    jumping += 1
                if deficit > 0.0 and gap > 0.0:
                    add = min(deficit, gap)
                    flows[e] += add
                    deficit -= add
            return flows, _used_level(coef, degrees, offsets, flows, hi), iterations, COLLAPSED, jumping > 1
        s = _masses(coef, degrees, offsets, mid, demand, inner_iterations, flows)
        if abs(s - demand) <= tol:
            return flows, _used_level(coef, degrees, offsets, flows, mid), iterations, CONVERGED, False
        if s < demand:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    _masses(coef, degrees, offsets, mid, demand, inner_iterations, flows)
    return flows, mid, iterations, MAX_ITER, False


def _solve(network: Network, level_coef: np.ndarray, offsets, config: SolverConfig | None, what: str):
    config = config or SolverConfig()
    coef = np.ascontiguousarray(level_coef, dtype=float)
    if coef.shape != network.shape:
        raise ValueError(f"coefficient shape {coef.shape} does not match network {network.shape}")
    if np.any(coef < 0) or not np.all(np.isfinite(coef)):
        raise ValueError("coefficients must be finite and nonnegative")
    offsets = np.zeros(network.edge_count) if offsets is None else np.asarray(offsets, dtype=float)
    if offsets.shape != (network.edge_count,):
        raise ValueError("one toll per edge is required")
    flows, level, iterations, status, tied = _level_search(
        coef,
        network.degree_array,
        np.ascontiguousarray(offsets),
        network.demand,
        config.residual_tolerance,
        config.max_iterations,
        config.level_bracket_growth,
        config.inner_iterations,
    )
    result = EquilibriumResult(
        flow=Flow(flows, network.demand),
        common_level=float(level),
        used_edges=frozenset(int(e) for e in np.flatnonzero(flows > 0)),
        iterations=int(iterations),
        degenerate=bool(tied),
    )
    if status == MAX_ITER:
        raise SolverError(
            f"{what} level search did not converge in {config.max_iterations} iterations", best=result
        )
    return result


def nash_flow(network: Network, alpha, config: SolverConfig | None = None, tolls=None) -> EquilibriumResult:
    """Wardrop flow; ``tolls`` adds a constant charge per edge to the users' cost.

    When several constant edges tie at the equilibrium level the split is
    indeterminate; mass goes to the lowest-indexed tied edge first and the
    result is flagged ``degenerate``.  Total latency does not depend on it.
    """
    return _solve(network, alpha, tolls, config, "Nash")


def optimal_flow(network: Network, alpha, config: SolverConfig | None = None) -> EquilibriumResult:
    """Minimizer of total latency, found by equalizing marginal costs."""
    scaled = np.asarray(alpha, dtype=float) * (network.degree_array + 1.0)
    return _solve(network, scaled, None, config, "optimal")


def brute_force_best_flow(network: Network, alpha, grid_points: int) -> Flow:
    """Exhaustive grid search of the flow simplex (test oracle only)."""
    if network.edge_count > 4:
        raise ValueError("brute force search supports at most 4 edges")
    if not 2 <= grid_points <= 2000:
        raise ValueError("grid_points must lie in [2, 2000]")
    r = network.demand
    grid = np.linspace(0.0, r, grid_points)
    alpha = np.asarray(alpha, dtype=float)
    degrees = network.degree_array

    def cost(x, e):
        return x * (np.power(x[..., None], degrees) @ alpha[e])

    best_value, best_flow = np.inf, None
    outer = network.edge_count - 3
    for prefix in itertools.product(grid, repeat=max(outer, 0)):
        used = sum(prefix)
        if used > r:
            continue
        head = sum(cost(np.array(p), e) for e, p in enumerate(prefix))
        rest = r - used
        if network.edge_count == 2:
            a = grid[grid <= rest]
            last = np.maximum(rest - a, 0.0)
            values = cost(a, 0) + cost(last, 1)
            k = int(np.argmin(values))
            candidate, value = (a[k], last[k]), values[k]
        else:
            a = grid[grid <= rest]
            A, B = np.meshgrid(a, a, indexing="ij")
            ok = A + B <= rest
            A, B = A[ok], B[ok]
            last = np.maximum(rest - A - B, 0.0)
            e0 = len(prefix)
            values = cost(A, e0) + cost(B, e0 + 1) + cost(last, e0 + 2)
            k = int(np.argmin(values))
            candidate, value = (A[k], B[k], last[k]), values[k]
        value = head + value
        if value < best_value:
            best_value, best_flow = value, tuple(prefix) + tuple(candidate)
    flow = Flow(np.array(best_flow, dtype=float), r)
    assert abs(total_latency(network, alpha, flow) - best_value) <= 1e-9 * max(1.0, abs(best_value))
    return flow
