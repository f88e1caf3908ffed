import numpy as np
import pytest

from bayescongestion import Network


def random_instance(rng, edges=(2, 5), max_degree=4, low=0.1, high=10.0, demand=1.0, need=()):
    """Random parallel network whose every edge has a positive nonconstant term."""
    n = int(rng.integers(edges[0], edges[1] + 1))
    pool = list(range(max_degree + 1))
    size = int(rng.integers(1, len(pool) + 1))
    degrees = set(rng.choice(pool, size=size, replace=False).tolist()) | set(need)
    if max(degrees) == 0:
        degrees.add(int(rng.integers(1, max_degree + 1)))
    degrees = tuple(sorted(degrees))
    network = Network(n, degrees, demand)
    alpha = rng.uniform(low, high, size=network.shape)
    return network, alpha


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def pigou():
    return Network(2, (0, 1)), np.array([[1.0, 0.0], [0.0, 1.0]])


def random_partition(rng, support, max_cuts=2):
    """Non-uniform product grid over the random coordinates of ``support``."""
    import itertools

    from bayescongestion import SignallingPolicy

    lo, hi = support.random_low, support.random_high
    breaks = [
        np.concatenate([[lo[j]], np.sort(rng.uniform(lo[j], hi[j], rng.integers(0, max_cuts + 1))), [hi[j]]])
        for j in range(lo.size)
    ]
    lows, highs = [], []
    for idx in itertools.product(*[range(len(b) - 1) for b in breaks]):
        lows.append([breaks[j][i] for j, i in enumerate(idx)])
        highs.append([breaks[j][i + 1] for j, i in enumerate(idx)])
    return SignallingPolicy(np.array(lows).reshape(len(lows), lo.size), np.array(highs).reshape(len(highs), lo.size))


def random_triple(rng, assumption=False):
    """(network, discrete prior, partition) with 2-6 atoms on random coordinates."""
    from bayescongestion import Prior

    net, alpha = random_instance(rng, edges=(2, 4), need=(0, 1) if assumption else ())
    m = int(rng.integers(2, 7))
    atoms = np.repeat(alpha[None], m, axis=0)
    mask = rng.random(net.shape) < 0.5
    mask[rng.integers(net.edge_count), rng.integers(len(net.degrees))] = True
    atoms[:, mask] = rng.uniform(0.1, 10.0, size=(m, int(mask.sum())))
    prior = Prior.discrete(atoms, rng.dirichlet(np.ones(m)))
    return net, prior, random_partition(rng, prior.support)
