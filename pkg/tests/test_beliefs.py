import numpy as np
import pytest
from scipy import integrate
from scipy.stats import multivariate_normal

from bayescongestion import (
    BoxSupport,
    MonteCarloConfig,
    Prior,
    SignallingPolicy,
    draw_pool,
    posterior_summaries,
    prior_mean,
    uniform_grid_policy,
)
from bayescongestion.beliefs import EstimationError

EXAMPLE_MEAN = np.array([30.0, 30.0])
EXAMPLE_COV = 180.0 * np.array([[2.0, 1.0], [1.0, 2.0]])


def square(lo, hi):
    # 2x2 coefficient arrays whose diagonal is random on [lo, hi]
    return BoxSupport([[lo, 1.0], [1.0, lo]], [[hi, 1.0], [1.0, hi]])


def example_prior():
    return Prior.truncated_gaussian(square(0.0, 60.0), EXAMPLE_MEAN, EXAMPLE_COV)


def test_grid_policy_examples():
    sup = square(0.0, 60.0)
    assert len(uniform_grid_policy(sup, 1)) == 1
    one = uniform_grid_policy(sup, 1)
    assert np.allclose(one.lows, [[0, 0]]) and np.allclose(one.highs, [[60, 60]])
    two = uniform_grid_policy(sup, 2)
    assert len(two) == 4
    assert np.allclose(two.lows[0], [0, 0]) and np.allclose(two.highs[0], [30, 30])
    three = uniform_grid_policy(square(0.0, 1.0), 3)
    assert len(three) == 9 and np.allclose(three.highs - three.lows, 1 / 3)
    with pytest.raises(ValueError):
        uniform_grid_policy(sup, 0)


def test_uniform_prior_cell():
    prior = Prior.uniform_box(np.zeros((2, 1)), np.ones((2, 1)))
    cells = posterior_summaries(prior, uniform_grid_policy(prior.support, 2))
    first = cells[0]
    assert first.cell_probability == pytest.approx(0.25)
    assert np.allclose(first.expected_coeffs.ravel(), [0.25, 0.25])
    assert np.allclose(prior_mean(prior).ravel(), [0.5, 0.5])


def two_atom_prior():
    atoms = np.array([[[0.5, 0.0], [0.0, 1.0]], [[1.5, 0.0], [0.0, 1.0]]])
    return Prior.discrete(atoms, [0.5, 0.5])


def test_discrete_prior_cell_pure_atoms():
    prior = two_atom_prior()
    policy = SignallingPolicy([[0.5], [1.0]], [[1.0], [1.5]])
    cells = posterior_summaries(prior, policy)
    assert [c.cell_probability for c in cells] == [0.5, 0.5]
    assert cells[0].expected_coeffs[0, 0] == 0.5 and cells[1].expected_coeffs[0, 0] == 1.5
    assert prior_mean(prior)[0, 0] == 1.0


def test_discrete_prior_in_two_random_coordinates():
    atoms = np.array([[[0.5, 0.0], [0.0, 1.0]], [[1.5, 0.0], [0.0, 1.0]], [[1.5, 0.0], [0.0, 3.0]]])
    prior = Prior.discrete(atoms, [0.5, 0.25, 0.25])
    mean = prior_mean(prior)
    assert mean[0, 0] == pytest.approx(1.0) and mean[1, 1] == pytest.approx(1.5)
    cells = posterior_summaries(prior, uniform_grid_policy(prior.support, 2))
    assert sum(c.cell_probability for c in cells) == pytest.approx(1.0)


def test_example_prior_mean_is_centre_by_symmetry():
    prior = example_prior()
    mc = MonteCarloConfig(samples=400_000)
    pool = draw_pool(prior, mc)
    (only,) = posterior_summaries(prior, uniform_grid_policy(prior.support, 1), pool=pool)
    got = prior.support.project(only.expected_coeffs)
    assert np.all(np.abs(got - EXAMPLE_MEAN) <= 3 * only.standard_error)
    assert np.all(np.abs(prior.support.project(prior_mean(prior, pool=pool)) - EXAMPLE_MEAN) <= 3 * only.standard_error)


def test_example_prior_cells_match_quadrature():
    prior = example_prior()
    pool = draw_pool(prior, MonteCarloConfig(samples=400_000))
    policy = uniform_grid_policy(prior.support, 2)
    cells = posterior_summaries(prior, policy, pool=pool)
    assert len(cells) == 4
    pdf = multivariate_normal(EXAMPLE_MEAN, EXAMPLE_COV).pdf

    def integral(g, lo, hi):
        return integrate.dblquad(lambda y, x: g(x, y) * pdf([x, y]), lo[0], hi[0], lo[1], hi[1], epsabs=1e-10)[0]

    mass = integral(lambda x, y: 1.0, (0, 0), (60, 60))
    for i, cell in enumerate(cells):
        lo, hi = policy.lows[i], policy.highs[i]
        p = integral(lambda x, y: 1.0, lo, hi)
        mx = integral(lambda x, y: x, lo, hi) / p
        my = integral(lambda x, y: y, lo, hi) / p
        n = len(pool)
        p_se = np.sqrt((p / mass) * (1 - p / mass) / n)
        assert abs(cell.cell_probability - p / mass) <= 4 * p_se, i
        est = prior.support.project(cell.expected_coeffs)
        assert np.all(np.abs(est - [mx, my]) <= 4 * cell.standard_error)


def test_law_of_total_expectation():
    for prior, pool in [
        (Prior.uniform_box(np.zeros((2, 2)), np.array([[1.0, 2.0], [3.0, 0.5]])), None),
        (two_atom_prior(), None),
        (example_prior(), draw_pool(example_prior(), MonteCarloConfig(samples=100_000))),
    ]:
        for b in (1, 2, 3, 5):
            cells = posterior_summaries(prior, uniform_grid_policy(prior.support, b), pool=pool)
            total = sum(c.cell_probability * c.expected_coeffs for c in cells)
            assert np.allclose(total, prior_mean(prior, pool=pool), rtol=1e-12, atol=1e-12)
            assert sum(c.cell_probability for c in cells) == pytest.approx(1.0, abs=1e-9)


def test_refined_grid_masses_aggregate_exactly():
    prior = example_prior()
    pool = draw_pool(prior, MonteCarloConfig(samples=200_000))
    for k in (1, 2, 3, 5, 6):
        coarse = uniform_grid_policy(prior.support, k)
        fine = uniform_grid_policy(prior.support, 2 * k)
        coarse_cells = coarse.assign(pool)
        fine_cells = fine.assign(pool)
        i, j = np.unravel_index(fine_cells, (2 * k, 2 * k))
        assert np.array_equal(np.ravel_multi_index((i // 2, j // 2), (k, k)), coarse_cells)


def test_posterior_means_inside_cells():
    prior = example_prior()
    pool = draw_pool(prior, MonteCarloConfig(samples=100_000))
    policy = uniform_grid_policy(prior.support, 7)
    for s in posterior_summaries(prior, policy, pool=pool):
        i = policy.labels.index(s.label)
        m = prior.support.project(s.expected_coeffs)
        assert np.all(m >= policy.lows[i]) and np.all(m <= policy.highs[i])


def test_pool_is_seed_deterministic():
    prior = example_prior()
    a = draw_pool(prior, MonteCarloConfig(seed=3, samples=10_000))
    b = draw_pool(prior, MonteCarloConfig(seed=3, samples=10_000))
    c = draw_pool(prior, MonteCarloConfig(seed=4, samples=10_000))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    s1 = posterior_summaries(prior, uniform_grid_policy(prior.support, 4), pool=a)
    s2 = posterior_summaries(prior, uniform_grid_policy(prior.support, 4), pool=b)
    assert all(np.array_equal(x.expected_coeffs, y.expected_coeffs) for x, y in zip(s1, s2))


def test_low_acceptance_is_an_estimation_error():
    prior = Prior.truncated_gaussian(square(0.0, 1.0), [50.0, 50.0], np.eye(2))
    with pytest.raises(EstimationError):
        draw_pool(prior, MonteCarloConfig(samples=1000))


def test_empty_cells_are_dropped_with_warning(caplog):
    prior = Prior.uniform_box(np.zeros((2, 1)), np.ones((2, 1)))
    policy = SignallingPolicy([[0, 0], [0, 0.5], [2, 2]], [[1, 0.5], [1, 1], [3, 3]])
    cells = posterior_summaries(prior, policy)
    assert [c.label for c in cells] == [0, 1]
    assert "empty" in caplog.text


def test_policy_must_cover_support():
    prior = Prior.uniform_box(np.zeros((2, 1)), np.ones((2, 1)))
    with pytest.raises(EstimationError):
        posterior_summaries(prior, SignallingPolicy([[0, 0]], [[0.5, 1]]))
    with pytest.raises(EstimationError):
        posterior_summaries(two_atom_prior(), SignallingPolicy([[0.5]], [[1.0]]))


def test_prior_validation():
    with pytest.raises(ValueError):
        Prior.discrete(np.ones((2, 2, 2)), [0.6, 0.6])
    with pytest.raises(ValueError):
        Prior.truncated_gaussian(square(0.0, 1.0), [0, 0], [[1, 2], [2, 1]])
    with pytest.raises(ValueError):
        BoxSupport([[1.0]], [[0.0]])
