"""Priors over coefficient arrays, partition signalling policies and posteriors.

A prior lives on a box.  Coordinates where the box has positive width are the
random coordinates; everything else is a point mass at the box corner.  Cells
of a policy, atoms of a discrete prior and Gaussian parameters are all
expressed over the random coordinates only, in row-major (edge, degree) order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

UNIFORM, DISCRETE, GAUSSIAN = "uniform-box", "discrete", "truncated-gaussian"


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoxSupport:
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = np.array(self.low, dtype=float)
        high = np.array(self.high, dtype=float)
        if low.shape != high.shape:
            raise ValueError("support corners must have the same shape")
        if np.any(low > high):
            raise ValueError("support low corner must not exceed high corner")
        if np.any(low < 0):
            raise ValueError("support must lie in the nonnegative orthant")
        for a in (low, high):
            a.setflags(write=False)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def random_index(self) -> np.ndarray:
        """Flat indices of coordinates with positive width."""
        return np.flatnonzero(self.high.ravel() > self.low.ravel())

    @property
    def random_low(self) -> np.ndarray:
        return self.low.ravel()[self.random_index]

    @property
    def random_high(self) -> np.ndarray:
        return self.high.ravel()[self.random_index]

    def embed(self, points) -> np.ndarray:
        """Lift points over the random coordinates to full coefficient arrays."""
        points = np.asarray(points, dtype=float)
        flat = np.broadcast_to(self.low.ravel(), points.shape[:-1] + (self.low.size,)).copy()
        flat[..., self.random_index] = points
        return flat.reshape(points.shape[:-1] + self.low.shape)

    def project(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        return alpha.reshape(alpha.shape[: alpha.ndim - 2] + (-1,))[..., self.random_index]


@dataclass(frozen=True)
class Prior:
    """Distribution of the coefficient array.  Build with the classmethods."""

    kind: str
    support: BoxSupport
    atoms: np.ndarray | None = None
    probabilities: np.ndarray | None = None
    mean: np.ndarray | None = None
    covariance: np.ndarray | None = None

    @classmethod
    def uniform_box(cls, low, high) -> "Prior":
        return cls(UNIFORM, BoxSupport(low, high))

    @classmethod
    def point_mass(cls, alpha) -> "Prior":
        return cls(UNIFORM, BoxSupport(alpha, alpha))

    @classmethod
    def discrete(cls, atoms, probabilities, support: BoxSupport | None = None) -> "Prior":
        """Finitely many full coefficient arrays with given probabilities.

        Without an explicit ``support`` the smallest box around the atoms is used.
        """
        atoms = np.asarray(atoms, dtype=float)
        probabilities = np.asarray(probabilities, dtype=float)
        if atoms.ndim != 3 or len(atoms) != len(probabilities):
            raise ValueError("atoms must be an (m, edges, degrees) array with one probability each")
        if np.any(probabilities < 0) or abs(probabilities.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        if support is None:
            support = BoxSupport(atoms.min(axis=0), atoms.max(axis=0))
        if np.any(atoms < support.low - 1e-12) or np.any(atoms > support.high + 1e-12):
            raise ValueError("every atom must lie inside the support box")
        # atoms off the random coordinates must sit on the point-mass values
        fixed = np.setdiff1d(np.arange(support.low.size), support.random_index)
        if np.any(atoms.reshape(len(atoms), -1)[:, fixed] != support.low.ravel()[fixed]):
            raise ValueError("atoms disagree with the support on a zero-width coordinate")
        return cls(DISCRETE, support, atoms=support.project(atoms), probabilities=probabilities)

    @classmethod
    def truncated_gaussian(cls, support: BoxSupport, mean, covariance) -> "Prior":
        """Normal over the random coordinates, conditioned on the support box."""
        k = support.random_index.size
        mean = np.asarray(mean, dtype=float).reshape(k)
        covariance = np.asarray(covariance, dtype=float).reshape(k, k)
        if not np.allclose(covariance, covariance.T):
            raise ValueError("covariance must be symmetric")
        if k and np.linalg.eigvalsh(covariance).min() < -1e-9 * max(1.0, np.abs(covariance).max()):
            raise ValueError("covariance must be positive semidefinite")
        return cls(GAUSSIAN, support, mean=mean, covariance=covariance)

    @property
    def dimension(self) -> int:
        return int(self.support.random_index.size)


@dataclass(frozen=True)
class MonteCarloConfig:
    seed: int = 42
    samples: int = 1_000_000
    min_survivors: int = 100
    min_acceptance: float = 0.01


@dataclass(frozen=True)
class SignallingPolicy:
    """Axis-aligned boxes over the random coordinates.

    Points are assigned to the first cell containing them, except for uniform
    grids, where a point on a shared face goes to the cell above it.
    """

    lows: np.ndarray
    highs: np.ndarray
    labels: tuple = ()
    grid: int | None = None
    origin: np.ndarray | None = field(default=None, repr=False)
    extent: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        lows = np.atleast_2d(np.asarray(self.lows, dtype=float))
        highs = np.atleast_2d(np.asarray(self.highs, dtype=float))
        if lows.shape != highs.shape or np.any(lows > highs):
            raise ValueError("cells need matching corners with low <= high")
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)
        labels = tuple(self.labels) or tuple(range(len(lows)))
        if len(labels) != len(lows):
            raise ValueError("one label per cell")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.lows)

    def assign(self, points) -> np.ndarray:
        """Cell index of each point, or -1 when no cell contains it."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.grid is not None:
            return self._grid_assign(points)
        out = np.full(len(points), -1, dtype=np.int64)
        for i in range(len(self) - 1, -1, -1):
            inside = np.all((points >= self.lows[i]) & (points <= self.highs[i]), axis=1)
            out[inside] = i
        return out

    def _grid_assign(self, points):
        b = self.grid
        k = points.shape[1]
        if k == 0:
            return np.zeros(len(points), dtype=np.int64)
        t = (points - self.origin) / self.extent
        outside = np.any((t < 0) | (t > 1), axis=1)
        idx = np.clip(np.floor(t * b), 0, b - 1).astype(np.int64)
        flat = np.ravel_multi_index(tuple(idx.T), (b,) * k)
        flat[outside] = -1
        return flat


def uniform_grid_policy(support: BoxSupport, granularity: int) -> SignallingPolicy:
    """Split every random coordinate of the support into ``granularity`` equal pieces."""
    b = int(granularity)
    if b != granularity or b < 1:
        raise ValueError(f"granularity must be a positive integer, got {granularity}")
    low, high = support.random_low, support.random_high
    k = low.size
    width = high - low
    rows = list(np.ndindex(*(b,) * k))
    index = np.array(rows, dtype=float).reshape(len(rows), k)
    lows = low + index * width / b
    highs = low + (index + 1) * width / b
    labels = tuple(tuple(int(i) + 1 for i in row) for row in index)
    return SignallingPolicy(lows, highs, labels, grid=b, origin=low, extent=width)


@dataclass(frozen=True)
class PosteriorSummary:
    label: object
    cell_probability: float
    expected_coeffs: np.ndarray
    sample_count: int | None = None
    standard_error: np.ndarray | None = None


def draw_pool(prior: Prior, mc: MonteCarloConfig | None = None) -> np.ndarray:
    """Seeded draws from a truncated Gaussian prior, rejected outside the box."""
    if prior.kind != GAUSSIAN:
        raise ValueError("sample pools are only used for truncated-gaussian priors")
    mc = mc or MonteCarloConfig()
    rng = np.random.default_rng(mc.seed)
    z = rng.multivariate_normal(prior.mean, prior.covariance, size=mc.samples, method="svd")
    keep = np.all((z >= prior.support.random_low) & (z <= prior.support.random_high), axis=1)
    pool = z[keep]
    if len(pool) < mc.min_survivors:
        raise EstimationError(f"only {len(pool)} of {mc.samples} samples fell inside the support")
    if len(pool) < mc.min_acceptance * mc.samples:
        raise EstimationError(f"acceptance rate {len(pool) / mc.samples:.4f} below {mc.min_acceptance}")
    pool.setflags(write=False)
    return pool


def _pool_summaries(prior, policy, pool):
    cells = policy.assign(pool)
    if np.any(cells < 0):
        raise EstimationError("policy cells do not cover every sample in the support")
    m, n = len(policy), len(pool)
    counts = np.bincount(cells, minlength=m)
    sums = np.stack([np.bincount(cells, weights=pool[:, j], minlength=m) for j in range(pool.shape[1])], axis=1)
    squares = np.stack(
        [np.bincount(cells, weights=pool[:, j] ** 2, minlength=m) for j in range(pool.shape[1])], axis=1
    )
    out = []
    for i in range(m):
        c = counts[i]
        if c == 0:
            out.append(None)
            continue
        mean = sums[i] / c
        var = np.maximum(squares[i] / c - mean**2, 0.0)
        se = np.sqrt(var / max(c - 1, 1))
        out.append(PosteriorSummary(policy.labels[i], c / n, prior.support.embed(mean), int(c), se))
    return out


def _uniform_summaries(prior, policy):
    lo, hi = prior.support.random_low, prior.support.random_high
    total = np.prod(hi - lo)
    out = []
    for i in range(len(policy)):
        a = np.maximum(policy.lows[i], lo)
        b = np.minimum(policy.highs[i], hi)
        volume = np.prod(np.maximum(b - a, 0.0))
        if volume <= 0:
            out.append(None)
            continue
        out.append(PosteriorSummary(policy.labels[i], volume / total, prior.support.embed((a + b) / 2)))
    covered = sum(s.cell_probability for s in out if s is not None)
    if abs(covered - 1.0) > 1e-9:
        raise EstimationError(f"policy cells cover {covered:.6f} of the support, expected a partition")
    return out


def _discrete_summaries(prior, policy):
    cells = policy.assign(prior.atoms)
    if np.any(cells < 0):
        raise EstimationError("an atom lies outside every policy cell")
    out = []
    for i in range(len(policy)):
        w = np.where(cells == i, prior.probabilities, 0.0)
        p = w.sum()
        if p <= 0:
            out.append(None)
            continue
        out.append(PosteriorSummary(policy.labels[i], p, prior.support.embed(w @ prior.atoms / p)))
    return out


def posterior_summaries(
    prior: Prior,
    policy: SignallingPolicy,
    mc: MonteCarloConfig | None = None,
    pool: np.ndarray | None = None,
) -> list[PosteriorSummary]:
    """Signal probabilities and posterior mean coefficients, one per nonempty cell.

    Uniform and discrete priors are handled exactly.  Truncated Gaussians use
    the shared sample ``pool`` (drawn from ``mc`` if not supplied).
    """
    if prior.kind == UNIFORM:
        if prior.dimension == 0:
            raw = [PosteriorSummary(policy.labels[0], 1.0, prior.support.low)] + [None] * (len(policy) - 1)
        else:
            raw = _uniform_summaries(prior, policy)
    elif prior.kind == DISCRETE:
        raw = _discrete_summaries(prior, policy)
    elif prior.kind == GAUSSIAN:
        raw = _pool_summaries(prior, policy, draw_pool(prior, mc) if pool is None else pool)
    else:
        raise ValueError(f"unknown prior kind {prior.kind!r}")
    empty = [policy.labels[i] for i, s in enumerate(raw) if s is None]
    if empty:
        logger.warning("dropping %d empty signalling cell(s): %s", len(empty), empty[:5])
    return [s for s in raw if s is not None]


def prior_mean(prior: Prior, mc: MonteCarloConfig | None = None, pool: np.ndarray | None = None) -> np.ndarray:
    if prior.kind == UNIFORM:
        return prior.support.embed((prior.support.random_low + prior.support.random_high) / 2)
    if prior.kind == DISCRETE:
        return prior.support.embed(prior.probabilities @ prior.atoms)
    if prior.kind == GAUSSIAN:
        pool = draw_pool(prior, mc) if pool is None else pool
        return prior.support.embed(pool.mean(axis=0))
    raise ValueError(f"unknown prior kind {prior.kind!r}")
