"""Shared randomized-instance generators for the test suite.

Everything is driven by explicit numpy generators so failures reproduce.
Curvature scales and penalty values are kept in moderate bands; extreme
ratios push transition eigenvalues toward the unit circle and the tests
assert a clear gap.
"""

import numpy as np

from admmrate import topology as topo
from admmrate.objectives import Exponential, Quadratic, ScaledSquare, make_instance


def random_connected_edges(rng, n_agents):
    """Random spanning tree plus a few extra edges, 1-based pairs."""
    order = [int(v) + 1 for v in rng.permutation(n_agents)]
    edges = set()
    for i in range(1, n_agents):
        j = int(rng.integers(0, i))
        a, b = order[i], order[j]
        edges.add((min(a, b), max(a, b)))
    for _ in range(int(rng.integers(0, n_agents))):
        pick = rng.choice(n_agents, size=2, replace=False)
        a, b = int(pick[0]) + 1, int(pick[1]) + 1
        edges.add((min(a, b), max(a, b)))
    return sorted(edges)


def random_cluster_components(rng, n_agents):
    """Clusters of size 2..4 chained with one shared agent, covering all."""
    perm = [int(v) + 1 for v in rng.permutation(n_agents)]
    comps = []
    i = 0
    while i < n_agents - 1:
        size = int(rng.integers(2, 5))
        comp = perm[i : i + size]
        if len(comp) < 2:
            comp = perm[-2:]
        comps.append(tuple(comp))
        i += len(comp) - 1
    return tuple(comps)


def random_structure(rng, max_agents=10, dim=1):
    """One of the four supported layouts, guaranteed valid."""
    kind = rng.choice(["centralized", "ring", "edges", "clusters"])
    n = int(rng.integers(3, max_agents + 1))
    if kind == "centralized":
        cs = topo.centralized(n, dim)
    elif kind == "ring":
        cs = topo.ring(n, dim)
    elif kind == "edges":
        cs = topo.from_edges(random_connected_edges(rng, n), n, dim)
    else:
        cs = topo.ComponentStructure(n, dim, random_cluster_components(rng, n))
    assert topo.validate(cs).valid
    return cs


def random_psd(rng, k, lo=0.5, hi=8.0, singular=False):
    """Random symmetric PSD matrix with eigenvalues in [lo, hi] (one zeroed
    when ``singular``)."""
    basis, _ = np.linalg.qr(rng.standard_normal((k, k)))
    eigs = lo + (hi - lo) * rng.random(k)
    if singular and k > 1:
        eigs[0] = 0.0
    return (basis * eigs) @ basis.T


def random_quadratic_instance(rng, n_agents, dim, allow_singular=True):
    oracles = []
    for a in range(n_agents):
        singular = allow_singular and a > 0 and rng.random() < 0.3
        phi = random_psd(rng, dim, singular=singular)
        c = 3.0 * rng.standard_normal(dim)
        oracles.append(Quadratic(phi, c, d=float(rng.standard_normal())))
    return make_instance(oracles)


def random_scalar_instance(rng, n_agents):
    """Mix of exponential and shifted-square scalar oracles.

    The first oracle is always a shifted square so the aggregate is
    coercive regardless of the exponential growth signs."""
    oracles = [ScaledSquare(float(rng.uniform(0.3, 5.0)), float(rng.uniform(-5.0, 5.0)))]
    for _ in range(n_agents - 1):
        if rng.random() < 0.5:
            beta = float(rng.uniform(0.5, 3.0) * rng.choice([-1.0, 1.0]))
            oracles.append(Exponential(beta))
        else:
            oracles.append(ScaledSquare(float(rng.uniform(0.3, 5.0)),
                                        float(rng.uniform(-5.0, 5.0))))
    return make_instance(oracles)


def random_hessians(rng, cs, lo=0.5, hi=8.0):
    return [random_psd(rng, cs.dim, lo=lo, hi=hi) for _ in range(cs.n_agents)]


def multiset_max_distance(a, b):
    """Max pairing distance between two equally sized complex multisets."""
    a = [complex(v) for v in a]
    b = [complex(v) for v in b]
    assert len(a) == len(b)
    worst = 0.0
    for x in a:
        j = min(range(len(b)), key=lambda j: abs(b[j] - x))
        worst = max(worst, abs(b[j] - x))
        b.pop(j)
    return worst
