"""Parallel congestion games with polynomial edge latencies.

Coefficients are stored densely as an ``(edge_count, len(degrees))`` float
array; absent polynomial terms are explicit zeros.  ``0 ** 0`` is taken as 1
so the degree-zero column is a constant offset.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Network:
    """A parallel network: ``edge_count`` links, shared degree set, demand."""

    edge_count: int
    degrees: tuple[int, ...]
    demand: float = 1.0

    def __post_init__(self):
        degrees = tuple(int(d) for d in self.degrees)
        if len(degrees) < 1:
            raise ValueError("degree set must be non-empty")
        if any(d < 0 for d in degrees):
            raise ValueError(f"degrees must be nonnegative, got {degrees}")
        if list(degrees) != sorted(set(degrees)):
            raise ValueError(f"degrees must be distinct and ascending, got {degrees}")
        object.__setattr__(self, "degrees", degrees)
        if int(self.edge_count) != self.edge_count or self.edge_count < 2:
            raise ValueError(f"edge_count must be an integer >= 2, got {self.edge_count}")
        object.__setattr__(self, "edge_count", int(self.edge_count))
        if not np.isfinite(self.demand) or self.demand <= 0:
            raise ValueError(f"demand must be positive, got {self.demand}")
        object.__setattr__(self, "demand", float(self.demand))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.edge_count, len(self.degrees))

    @property
    def degree_array(self) -> np.ndarray:
        return np.asarray(self.degrees, dtype=np.int64)

    def degree_index(self, degree: int) -> int:
        try:
            return self.degrees.index(degree)
        except ValueError:
            raise KeyError(f"degree {degree} not in {self.degrees}") from None


@dataclass(frozen=True)
class Flow:
    per_edge: np.ndarray
    total: float

    def __post_init__(self):
        per_edge = np.array(self.per_edge, dtype=float)
        per_edge.setflags(write=False)
        object.__setattr__(self, "per_edge", per_edge)
        object.__setattr__(self, "total", float(self.total))
        if np.any(per_edge < 0):
            raise ValueError(f"negative edge flow: {per_edge}")

    def __len__(self):
        return len(self.per_edge)


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of checking the positivity assumption on the lower support corner.

    ``violations`` holds ``(edge, condition)`` pairs; ``edge`` is ``None`` for
    conditions on the degree set itself.
    """

    violations: tuple[tuple[int | None, str], ...] = field(default_factory=tuple)

    @property
    def holds(self) -> bool:
        return not self.violations


def coefficients(network: Network, values) -> np.ndarray:
    """Validate and return a read-only coefficient array for ``network``."""
    alpha = np.array(values, dtype=float)
    if alpha.shape != network.shape:
        raise ValueError(f"coefficient shape {alpha.shape} does not match network {network.shape}")
    if not np.all(np.isfinite(alpha)):
        raise ValueError("coefficients must be finite")
    if np.any(alpha < 0):
        raise ValueError("coefficients must be nonnegative")
    alpha.setflags(write=False)
    return alpha


def _check_edge(network: Network, edge: int):
    if not 0 <= edge < network.edge_count:
        raise IndexError(f"edge {edge} out of range for {network.edge_count} edges")


def _powers(network: Network, mass) -> np.ndarray:
    # float ** 0 is 1.0 for every base, including 0.0
    return np.power(np.asarray(mass, dtype=float)[..., None], network.degree_array)


def edge_latency(network: Network, alpha: np.ndarray, edge: int, mass):
    """Latency of ``edge`` carrying ``mass``: sum over d of alpha[e, d] * mass**d."""
    _check_edge(network, edge)
    if np.any(np.asarray(mass) < 0):
        raise ValueError("mass must be nonnegative")
    return _powers(network, mass) @ np.asarray(alpha[edge], dtype=float)


def marginal_cost(network: Network, alpha: np.ndarray, edge: int, mass):
    """d/dx [x * latency(x)] evaluated at ``mass``."""
    _check_edge(network, edge)
    if np.any(np.asarray(mass) < 0):
        raise ValueError("mass must be nonnegative")
    weights = (network.degree_array + 1) * np.asarray(alpha[edge], dtype=float)
    return _powers(network, mass) @ weights


def latencies(network: Network, alpha: np.ndarray, per_edge) -> np.ndarray:
    """Vector of edge latencies at the given per-edge masses."""
    per_edge = np.asarray(per_edge, dtype=float)
    return np.einsum("ed,ed->e", _powers(network, per_edge), np.asarray(alpha, dtype=float))


def total_latency(network: Network, alpha: np.ndarray, flow) -> float:
    per_edge = np.asarray(getattr(flow, "per_edge", flow), dtype=float)
    if per_edge.shape != (network.edge_count,):
        raise ValueError(f"flow shape {per_edge.shape} does not match {network.edge_count} edges")
    if np.shape(alpha) != network.shape:
        raise ValueError("coefficient shape does not match network")
    return float(per_edge @ latencies(network, alpha, per_edge))


def normalize_demand(network: Network, alpha: np.ndarray) -> tuple[Network, np.ndarray]:
    """Rescale to unit demand.

    A flow ``f`` of the original game maps to ``f / demand`` in the returned
    game; equilibria and total latency are preserved under that map.
    """
    r = network.demand
    if not r > 0:
        raise ValueError(f"demand must be positive, got {r}")
    scale = r ** (network.degree_array + 1.0)
    unit = Network(network.edge_count, network.degrees, 1.0)
    return unit, coefficients(unit, np.asarray(alpha, dtype=float) * scale)


def check_assumption(network: Network, support_low: np.ndarray) -> AssumptionReport:
    """Require 0 and 1 in the degree set and positive constant and linear floors."""
    violations: list[tuple[int | None, str]] = []
    low = np.asarray(support_low, dtype=float)
    for degree in (0, 1):
        if degree not in network.degrees:
            violations.append((None, f"degree {degree} missing from degree set"))
            continue
        j = network.degree_index(degree)
        for e in range(network.edge_count):
            if not low[e, j] > 0:
                violations.append((e, f"lower support coefficient for degree {degree} is not positive"))
    return AssumptionReport(tuple(violations))
