"""Experiment configuration files (YAML).

Coefficients are addressed as ``edge<k>.d<degree>`` with 1-based edge
numbers.  A scalar fixes the coefficient; a ``{low, high}`` mapping makes it
random.  Unlisted coefficients are zero.  Prior parameters (mean, covariance,
atoms) are given over the random coefficients in declaration order.

Example::

    network:
      edges: 2
      degrees: [0, 2]
      coefficients:
        edge1.d0: {low: 0, high: 60}
        edge1.d2: 1
        edge2.d0: 1
        edge2.d2: {low: 0, high: 60}
    prior:
      kind: truncated-gaussian
      mean: [30, 30]
      covariance: [[360, 180], [180, 360]]
    policy:
      sweep: {b_min: 1, b_max: 12}
"""
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .beliefs import DISCRETE, GAUSSIAN, UNIFORM, BoxSupport, MonteCarloConfig, Prior, SignallingPolicy, uniform_grid_policy
from .game import Network
from .solvers import SolverConfig

_COEF_KEY = re.compile(r"^edge(\d+)\.d(\d+)$")
TOLL_MODES = ("on", "off", "both")


class ConfigError(ValueError):
    def __init__(self, field: str, message: str, line: int | None = None):
        self.field = field
        self.message = message
        self.line = line
        where = f"{field} (line {line})" if line else field
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    edges: int
    degrees: tuple[int, ...]
    # (edge, degree) -> value or (low, high); 0-based edges, declaration order
    coefficients: tuple[tuple[tuple[int, int], float | tuple[float, float]], ...]
    demand: float = 1.0
    prior_kind: str | None = None
    mean: tuple[float, ...] | None = None
    covariance: tuple[tuple[float, ...], ...] | None = None
    atoms: tuple[tuple[float, ...], ...] | None = None
    probabilities: tuple[float, ...] | None = None
    granularity: int | None = None
    b_min: int | None = None
    b_max: int | None = None
    cells: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...] | None = None
    tolls: str = "both"
    monte_carlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: str | None = None

    # -- derived objects -------------------------------------------------

    def network(self) -> Network:
        return Network(self.edges, self.degrees, self.demand)

    @property
    def random_coefficients(self) -> list[tuple[int, int]]:
        return [key for key, value in self.coefficients if isinstance(value, tuple)]

    def _flat(self, key) -> int:
        e, d = key
        return e * len(self.degrees) + self.degrees.index(d)

    def support(self) -> BoxSupport:
        low = np.zeros((self.edges, len(self.degrees)))
        high = np.zeros_like(low)
        for (e, d), value in self.coefficients:
            j = self.degrees.index(d)
            low[e, j], high[e, j] = value if isinstance(value, tuple) else (value, value)
        return BoxSupport(low, high)

    def _order(self) -> np.ndarray:
        # declaration order -> row-major order used by BoxSupport
        return np.argsort([self._flat(k) for k in self.random_coefficients], kind="stable")

    def prior(self) -> Prior:
        support = self.support()
        if not self.random_coefficients:
            return Prior.point_mass(support.low)
        order = self._order()
        if self.prior_kind == UNIFORM:
            return Prior.uniform_box(support.low, support.high)
        if self.prior_kind == GAUSSIAN:
            mean = np.asarray(self.mean)[order]
            cov = np.asarray(self.covariance)[np.ix_(order, order)]
            return Prior.truncated_gaussian(support, mean, cov)
        if self.prior_kind == DISCRETE:
            atoms = support.embed(np.asarray(self.atoms)[:, order])
            return Prior.discrete(atoms, np.asarray(self.probabilities), support)
        raise ConfigError("prior.kind", f"unknown prior kind {self.prior_kind!r}")

    def granularities(self) -> list[int]:
        if self.b_min is not None:
            return list(range(self.b_min, self.b_max + 1))
        if self.granularity is not None:
            return [self.granularity]
        return []

    def explicit_policy(self) -> SignallingPolicy | None:
        if self.cells is None:
            return None
        order = self._order()
        lows = np.array([c[0] for c in self.cells], dtype=float)[:, order]
        highs = np.array([c[1] for c in self.cells], dtype=float)[:, order]
        return SignallingPolicy(lows, highs)

    def grid_policy(self, b: int) -> SignallingPolicy:
        return uniform_grid_policy(self.support(), b)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        coefs = {}
        for (e, d), value in self.coefficients:
            key = f"edge{e + 1}.d{d}"
            coefs[key] = {"low": value[0], "high": value[1]} if isinstance(value, tuple) else value
        out: dict = {"network": {"edges": self.edges, "degrees": list(self.degrees), "demand": self.demand, "coefficients": coefs}}
        if self.prior_kind is not None:
            prior: dict = {"kind": self.prior_kind}
            if self.mean is not None:
                prior["mean"] = list(self.mean)
                prior["covariance"] = [list(row) for row in self.covariance]
            if self.atoms is not None:
                prior["atoms"] = [list(a) for a in self.atoms]
                prior["probabilities"] = list(self.probabilities)
            out["prior"] = prior
        policy: dict = {}
        if self.granularity is not None:
            policy["granularity"] = self.granularity
        if self.b_min is not None:
            policy["sweep"] = {"b_min": self.b_min, "b_max": self.b_max}
        if self.cells is not None:
            policy["cells"] = [{"low": list(lo), "high": list(hi)} for lo, hi in self.cells]
        if policy:
            out["policy"] = policy
        out["tolls"] = self.tolls
        out["monte_carlo"] = dataclasses.asdict(self.monte_carlo)
        out["solver"] = dataclasses.asdict(self.solver)
        if self.output is not None:
            out["output"] = self.output
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _line_map(text: str) -> dict[tuple, int]:
    """Map key paths to 1-based source lines."""
    lines: dict[tuple, int] = {}

    def walk(node, path):
        lines.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, ())
    return lines


class _Reader:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, path: tuple, message: str):
        name = ".".join(str(p) for p in path)
        line = None
        for k in range(len(path), -1, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        raise ConfigError(name or "<root>", message, line)

    def number(self, value, path, positive=False, nonnegative=False) -> float:
        if isinstance(value, str):
            # YAML 1.1 reads exponent literals such as 1e-10 as strings
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        value = float(value)
        if not np.isfinite(value):
            self.fail(path, "must be finite")
        if positive and value <= 0:
            self.fail(path, "must be positive")
        if nonnegative and value < 0:
            self.fail(path, "must be nonnegative")
        return value

    def integer(self, value, path, minimum=None) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            self.fail(path, f"must be >= {minimum}")
        return int(value)

    def mapping(self, value, path) -> dict:
        if not isinstance(value, dict):
            self.fail(path, "expected a mapping")
        return value

    def vector(self, value, path, length=None) -> tuple[float, ...]:
        if not isinstance(value, list):
            self.fail(path, "expected a list")
        if length is not None and len(value) != length:
            self.fail(path, f"expected {length} entries, got {len(value)}")
        return tuple(self.number(v, path + (i,)) for i, v in enumerate(value))

    def unknown(self, data: dict, allowed, path):
        for key in data:
            if key not in allowed:
                self.fail(path + (key,), f"unknown key (allowed: {', '.join(allowed)})")


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<file>", f"invalid YAML: {exc}", mark.line + 1 if mark else None) from None
    rd = _Reader(_line_map(text))
    raw = rd.mapping(raw if raw is not None else {}, ())
    rd.unknown(raw, ("network", "prior", "policy", "tolls", "monte_carlo", "solver", "output"), ())

    net = rd.mapping(raw.get("network"), ("network",))
    rd.unknown(net, ("edges", "degrees", "demand", "coefficients"), ("network",))
    edges = rd.integer(net.get("edges"), ("network", "edges"), minimum=2)
    deg_raw = net.get("degrees")
    if not isinstance(deg_raw, list) or not deg_raw:
        rd.fail(("network", "degrees"), "expected a non-empty list of degrees")
    degrees = tuple(rd.integer(d, ("network", "degrees", i), minimum=0) for i, d in enumerate(deg_raw))
    if list(degrees) != sorted(set(degrees)):
        rd.fail(("network", "degrees"), "degrees must be distinct and ascending")
    demand = rd.number(net.get("demand", 1.0), ("network", "demand"), positive=True)

    coefs = []
    seen = set()
    for key, value in rd.mapping(net.get("coefficients", {}), ("network", "coefficients")).items():
        path = ("network", "coefficients", key)
        m = _COEF_KEY.match(str(key))
        if not m:
            rd.fail(path, "coefficient keys look like edge<k>.d<degree>")
        e, d = int(m.group(1)) - 1, int(m.group(2))
        if not 0 <= e < edges:
            rd.fail(path, f"edge number must be between 1 and {edges}")
        if d not in degrees:
            rd.fail(path, f"degree {d} is not in the degree set {list(degrees)}")
        if (e, d) in seen:
            rd.fail(path, "coefficient given twice")
        seen.add((e, d))
        if isinstance(value, dict):
            rd.unknown(value, ("low", "high"), path)
            lo = rd.number(value.get("low"), path + ("low",), nonnegative=True)
            hi = rd.number(value.get("high"), path + ("high",), nonnegative=True)
            if not lo < hi:
                rd.fail(path, "random coefficient needs low < high")
            coefs.append(((e, d), (lo, hi)))
        else:
            coefs.append(((e, d), rd.number(value, path, nonnegative=True)))
    k = sum(isinstance(v, tuple) for _, v in coefs)

    kw: dict = {}
    if "prior" in raw:
        pr = rd.mapping(raw["prior"], ("prior",))
        rd.unknown(pr, ("kind", "mean", "covariance", "atoms", "probabilities"), ("prior",))
        kind = pr.get("kind")
        if kind not in (UNIFORM, DISCRETE, GAUSSIAN):
            rd.fail(("prior", "kind"), f"expected one of {UNIFORM}, {DISCRETE}, {GAUSSIAN}")
        kw["prior_kind"] = kind
        if kind == GAUSSIAN:
            kw["mean"] = rd.vector(pr.get("mean"), ("prior", "mean"), k)
            cov_raw = pr.get("covariance")
            if not isinstance(cov_raw, list) or len(cov_raw) != k:
                rd.fail(("prior", "covariance"), f"expected a {k}x{k} matrix")
            cov = tuple(rd.vector(row, ("prior", "covariance", i), k) for i, row in enumerate(cov_raw))
            c = np.array(cov).reshape(k, k)
            if not np.allclose(c, c.T) or (k and np.linalg.eigvalsh(c).min() < -1e-9 * max(1.0, np.abs(c).max())):
                rd.fail(("prior", "covariance"), "must be symmetric positive semidefinite")
            kw["covariance"] = cov
        elif kind == DISCRETE:
            atoms_raw = pr.get("atoms")
            if not isinstance(atoms_raw, list) or not atoms_raw:
                rd.fail(("prior", "atoms"), "expected a non-empty list of atoms")
            kw["atoms"] = tuple(rd.vector(a, ("prior", "atoms", i), k) for i, a in enumerate(atoms_raw))
            probs = rd.vector(pr.get("probabilities"), ("prior", "probabilities"), len(atoms_raw))
            if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
                rd.fail(("prior", "probabilities"), "must be nonnegative and sum to 1")
            kw["probabilities"] = probs
            lows = [v[0] for _, v in coefs if isinstance(v, tuple)]
            highs = [v[1] for _, v in coefs if isinstance(v, tuple)]
            for i, atom in enumerate(kw["atoms"]):
                if any(not lo <= x <= hi for x, lo, hi in zip(atom, lows, highs)):
                    rd.fail(("prior", "atoms", i), "atom lies outside the coefficient intervals")
    elif k:
        rd.fail(("prior",), "random coefficients need a prior section")

    if "policy" in raw:
        po = rd.mapping(raw["policy"], ("policy",))
        rd.unknown(po, ("granularity", "sweep", "cells"), ("policy",))
        if "granularity" in po:
            kw["granularity"] = rd.integer(po["granularity"], ("policy", "granularity"), minimum=1)
        if "sweep" in po:
            sw = rd.mapping(po["sweep"], ("policy", "sweep"))
            rd.unknown(sw, ("b_min", "b_max"), ("policy", "sweep"))
            kw["b_min"] = rd.integer(sw.get("b_min"), ("policy", "sweep", "b_min"), minimum=1)
            kw["b_max"] = rd.integer(sw.get("b_max"), ("policy", "sweep", "b_max"), minimum=kw["b_min"])
        if "cells" in po:
            if not isinstance(po["cells"], list) or not po["cells"]:
                rd.fail(("policy", "cells"), "expected a non-empty list of boxes")
            cells = []
            for i, c in enumerate(po["cells"]):
                c = rd.mapping(c, ("policy", "cells", i))
                lo = rd.vector(c.get("low"), ("policy", "cells", i, "low"), k)
                hi = rd.vector(c.get("high"), ("policy", "cells", i, "high"), k)
                if any(a > b for a, b in zip(lo, hi)):
                    rd.fail(("policy", "cells", i), "cell low corner exceeds high corner")
                cells.append((lo, hi))
            kw["cells"] = tuple(cells)

    tolls = raw.get("tolls", "both")
    if isinstance(tolls, bool):  # YAML 1.1 reads bare on/off as booleans
        tolls = "on" if tolls else "off"
    if tolls not in TOLL_MODES:
        rd.fail(("tolls",), f"expected one of {', '.join(TOLL_MODES)}")
    kw["tolls"] = tolls

    mc = rd.mapping(raw.get("monte_carlo", {}), ("monte_carlo",))
    rd.unknown(mc, [f.name for f in dataclasses.fields(MonteCarloConfig)], ("monte_carlo",))
    mc_kw = {}
    for name in ("seed", "samples", "min_survivors"):
        if name in mc:
            mc_kw[name] = rd.integer(mc[name], ("monte_carlo", name), minimum=0 if name == "seed" else 1)
    if "min_acceptance" in mc:
        mc_kw["min_acceptance"] = rd.number(mc["min_acceptance"], ("monte_carlo", "min_acceptance"), nonnegative=True)
    kw["monte_carlo"] = MonteCarloConfig(**mc_kw)

    sv = rd.mapping(raw.get("solver", {}), ("solver",))
    rd.unknown(sv, [f.name for f in dataclasses.fields(SolverConfig)], ("solver",))
    sv_kw = {}
    for name in ("max_iterations", "inner_iterations"):
        if name in sv:
            sv_kw[name] = rd.integer(sv[name], ("solver", name), minimum=1)
    if "residual_tolerance" in sv:
        sv_kw["residual_tolerance"] = rd.number(sv["residual_tolerance"], ("solver", "residual_tolerance"), positive=True)
    if "level_bracket_growth" in sv:
        g = rd.number(sv["level_bracket_growth"], ("solver", "level_bracket_growth"))
        if not g > 1:
            rd.fail(("solver", "level_bracket_growth"), "must exceed 1")
        sv_kw["level_bracket_growth"] = g
    kw["solver"] = SolverConfig(**sv_kw)

    if raw.get("output") is not None:
        if not isinstance(raw["output"], str):
            rd.fail(("output",), "expected a path")
        kw["output"] = raw["output"]

    return ExperimentConfig(edges=edges, degrees=degrees, coefficients=tuple(coefs), demand=demand, **kw)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
