"""Batch experiments behind the command line: solve, granularity sweep, bounds."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import astuple, dataclass, fields

import numpy as np

from . import __version__
from .analysis import (
    benefit,
    bound_constants,
    bound_value,
    expected_latency_under_policy,
    tolls_for_flow,
    uncertainty_radius,
)
from .beliefs import GAUSSIAN, EstimationError, draw_pool, prior_mean, uniform_grid_policy
from .config import ExperimentConfig
from .game import total_latency
from .solvers import SolverError, nash_flow, optimal_flow

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "b",
    "baseline_untolled",
    "signalled_untolled",
    "benefit_untolled",
    "baseline_tolled",
    "signalled_tolled",
    "benefit_tolled",
    "theta_bound_value",
    "xi_bound_value",
    "mc_stderr",
)


@dataclass(frozen=True)
class SweepRow:
    b: int
    baseline_untolled: float = float("nan")
    signalled_untolled: float = float("nan")
    benefit_untolled: float = float("nan")
    baseline_tolled: float = float("nan")
    signalled_tolled: float = float("nan")
    benefit_tolled: float = float("nan")
    theta_bound_value: float = float("nan")
    xi_bound_value: float = float("nan")
    mc_stderr: float = float("nan")
    stderr_untolled: float = float("nan")
    stderr_tolled: float = float("nan")
    error: str | None = None

    def csv_values(self) -> tuple:
        return astuple(self)[: len(CSV_COLUMNS)]


assert tuple(f.name for f in fields(SweepRow))[: len(CSV_COLUMNS)] == CSV_COLUMNS


def run_solve(config: ExperimentConfig) -> str:
    if config.random_coefficients:
        raise ValueError("solve needs deterministic coefficients; use sweep for random ones")
    network = config.network()
    alpha = config.support().low
    nash = nash_flow(network, alpha, config.solver)
    opt = optimal_flow(network, alpha, config.solver)
    tolls = tolls_for_flow(network, alpha, opt.flow)
    constants = bound_constants(network, config.support())
    fmt = lambda v: np.array2string(np.asarray(v), precision=6, separator=", ")  # noqa: E731
    lines = [
        f"edges={network.edge_count} degrees={list(network.degrees)} demand={network.demand:g}",
        f"nash flow      {fmt(nash.flow.per_edge)}  level={nash.common_level:.10g}"
        + ("  (tied edges, split by index)" if nash.degenerate else ""),
        f"nash latency   {total_latency(network, alpha, nash.flow):.10g}",
        f"optimal flow   {fmt(opt.flow.per_edge)}  marginal level={opt.common_level:.10g}",
        f"optimal latency {total_latency(network, alpha, opt.flow):.10g}",
        f"optimal tolls  {fmt(tolls)}",
        "",
        _constants_text(constants),
    ]
    return "\n".join(lines)


def _constants_text(c) -> str:
    lines = [
        f"rho0_minus={c.rho0_minus:.10g} rho1_minus={c.rho1_minus:.10g} rho_plus={c.rho_plus:.10g}",
        f"theta={c.theta:.10g} xi={c.xi:.10g}",
    ]
    if c.assumption.holds:
        lines.append("positivity assumption: holds")
    else:
        lines.append("positivity assumption: FAILS, bounds not certified")
        for edge, what in c.assumption.violations:
            lines.append(f"  - {'degree set' if edge is None else f'edge {edge + 1}'}: {what}")
    return "\n".join(lines)


def run_bounds(config: ExperimentConfig) -> str:
    network = config.network()
    prior = config.prior()
    support = prior.support
    mc = config.monte_carlo
    constants = bound_constants(network, support)
    radius = uncertainty_radius(prior_mean(prior, mc), support)
    flag = "" if constants.assumption.holds else "  (not certified)"
    return "\n".join(
        [
            _constants_text(constants),
            f"distance from mean to low corner={radius:.10g}",
            f"untolled bound value={bound_value(constants.theta, radius):.10g}{flag}",
            f"tolled bound value={bound_value(constants.xi, radius):.10g}{flag}",
        ]
    )


def run_sweep(config: ExperimentConfig, granularities=None) -> list[SweepRow]:
    """One row per grid granularity; untolled and tolled benefits share one sample pool.

    Explicitly listed policy cells, if any, come first as the row with ``b = 0``.
    """
    network = config.network()
    prior = config.prior()
    solver, mc = config.solver, config.monte_carlo
    granularities = list(granularities or config.granularities())
    policies = [(b, config.grid_policy(b)) for b in granularities]
    explicit = config.explicit_policy()
    if explicit is not None:
        policies.insert(0, (0, explicit))
    if not policies:
        policies = [(1, config.grid_policy(1))]
    modes = {"on": (True,), "off": (False,), "both": (False, True)}[config.tolls]

    pool = draw_pool(prior, mc) if prior.kind == GAUSSIAN else None
    trivial = uniform_grid_policy(prior.support, 1)
    baselines = {t: expected_latency_under_policy(network, prior, trivial, t, solver, mc, pool) for t in modes}

    rows = []
    for b, policy in policies:
        values: dict = {"b": b}
        try:
            for tolled in modes:
                report = benefit(network, prior, policy, tolled, solver, mc, pool, baselines[tolled])
                tag = "tolled" if tolled else "untolled"
                values[f"baseline_{tag}"] = report.baseline_latency
                values[f"signalled_{tag}"] = report.signalled_latency
                values[f"benefit_{tag}"] = report.benefit
                values["xi_bound_value" if tolled else "theta_bound_value"] = report.bound_value
                values[f"stderr_{tag}"] = report.stderr
            values["mc_stderr"] = float(np.nanmax([values.get("stderr_untolled", np.nan), values.get("stderr_tolled", np.nan)]))
        except (SolverError, EstimationError) as exc:
            logger.error("granularity %d failed: %s", b, exc)
            values = {"b": b, "error": str(exc)}
        rows.append(SweepRow(**values))
    return rows


def sweep_csv(rows: list[SweepRow], config: ExperimentConfig) -> str:
    buf = io.StringIO()
    mc = config.monte_carlo
    buf.write(f"# bayescongestion {__version__} sweep\n")
    buf.write(f"# seed={mc.seed} samples={mc.samples} prior={config.prior_kind or 'point-mass'} tolls={config.tolls}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([row.b] + [repr(float(v)) for v in row.csv_values()[1:]])
    for row in rows:
        if row.error:
            buf.write(f"# error b={row.b}: {row.error}\n")
    return buf.getvalue()
