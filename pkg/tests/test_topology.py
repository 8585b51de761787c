import json
import math

import numpy as np
import pytest

from admmrate import topology as topo
from admmrate.errors import NotConnectedError

from conftest import random_structure

# deterministic fixture graph: 20 agents, radius 0.2, recorded seed
RGG_SEED = 1413
RGG_EDGES = (
    (1, 10), (1, 12), (2, 5), (2, 6), (2, 15), (3, 15), (4, 8), (4, 17),
    (5, 6), (6, 8), (8, 16), (8, 19), (7, 17), (7, 18), (9, 11), (9, 14),
    (9, 20), (10, 12), (11, 18), (11, 20), (12, 16), (12, 19), (13, 15),
    (16, 19),
)


def test_structure_normalizes_and_validates_inputs():
    cs = topo.ComponentStructure(5, 1, ((2, 1), (4, 5), (4, 2, 3)))
    assert cs.components == ((1, 2), (4, 5), (2, 3, 4))
    assert cs.total_rows == 7
    with pytest.raises(ValueError):
        topo.ComponentStructure(5, 1, ((1,),))
    with pytest.raises(ValueError):
        topo.ComponentStructure(5, 1, ((1, 6),))
    with pytest.raises(ValueError):
        topo.ComponentStructure(5, 1, ((1, 1),))


def test_validate_centralized_and_disconnected():
    assert topo.validate(topo.centralized(5)).valid
    report = topo.validate(topo.ComponentStructure(4, 1, ((1, 2), (3, 4))))
    assert report.covers_all_agents
    assert not report.component_graph_connected
    assert not report.valid


def test_validate_reports_missing_agents():
    report = topo.validate(topo.ComponentStructure(5, 1, ((1, 2), (2, 3))))
    assert report.missing_agents == (4, 5)
    assert not report.valid


def test_validate_six_ring():
    assert topo.validate(topo.ring(6)).valid


def test_ring_needs_three_agents():
    with pytest.raises(ValueError):
        topo.ring(2)


def test_component_graph_edges():
    cs = topo.ComponentStructure(5, 1, ((1, 2), (4, 5), (2, 3, 4)))
    assert topo.component_graph(cs) == ((1, 3), (2, 3))
    disconnected = topo.ComponentStructure(4, 1, ((1, 2), (3, 4)))
    assert topo.component_graph(disconnected) == ()


def test_selection_matrix_centralized_is_identity():
    assert np.array_equal(topo.selection_matrix(topo.centralized(4)), np.eye(4))


def test_selection_matrix_ring_structure():
    cs = topo.ring(5)
    s = topo.selection_matrix(cs)
    assert s.shape == (10, 5)
    assert np.all(s.sum(axis=1) == 1.0)
    # each pair block selects its two agents in ascending order
    assert cs.components == ((1, 2), (2, 3), (3, 4), (4, 5), (1, 5))
    assert np.array_equal(np.nonzero(s)[1] + 1, np.array(cs.row_agents))


def test_three_component_overlap_example():
    """Two pair clusters and one triple: the lifted vector lists the agent
    estimates cluster by cluster, ascending inside each."""
    cs = topo.ComponentStructure(5, 1, ((1, 2), (4, 5), (2, 3, 4)))
    assert topo.validate(cs).valid
    x = np.array([10.0, 20.0, 30.0, 40.0, 50.0])
    lifted = topo.selection_matrix(cs) @ x
    assert np.array_equal(lifted, [10.0, 20.0, 40.0, 50.0, 20.0, 30.0, 40.0])


def test_mixing_matrices_projector_properties():
    rng = np.random.default_rng(7)
    for _ in range(10):
        cs = random_structure(rng, max_agents=8, dim=int(rng.integers(1, 3)))
        m, pi, p = topo.mixing_matrices(cs)
        assert m.shape == (cs.total_rows * cs.dim, cs.n_agents * cs.dim)
        assert np.linalg.norm(p @ p - p) <= 1e-14 * p.shape[0]
        assert np.array_equal(p, p.T)
        ones = np.ones(cs.n_agents)
        assert np.array_equal(topo.selection_matrix(cs) @ ones, np.ones(cs.total_rows))


def test_averaging_fixes_lifted_ones():
    """The averaged residual (I - Pi) S 1 vanishes; exactly so for
    power-of-two cluster sizes, to machine epsilon otherwise (1/l is not
    a binary fraction for other sizes)."""
    cases = [
        topo.ring(6),
        topo.centralized(4),
        topo.centralized(7),
        topo.ComponentStructure(5, 1, ((1, 2), (4, 5), (2, 3, 4))),
    ]
    for cs in cases:
        s = topo.selection_matrix(cs)
        _, pi, _ = topo.mixing_matrices(cs)
        residual = (np.eye(cs.total_rows) - pi) @ (s @ np.ones(cs.n_agents))
        dyadic = all(len(c) & (len(c) - 1) == 0 for c in cs.components)
        if dyadic:
            assert np.all(residual == 0.0)
        else:
            assert np.abs(residual).max() <= 8 * np.finfo(float).eps


def test_edge_clustering_membership_equals_degree():
    rng = np.random.default_rng(8)
    from conftest import random_connected_edges

    for _ in range(10):
        n = int(rng.integers(3, 9))
        edges = random_connected_edges(rng, n)
        cs = topo.from_edges(edges, n)
        assert cs.total_rows == 2 * len(cs.components)
        degree = {a: 0 for a in range(1, n + 1)}
        for i, j in edges:
            degree[i] += 1
            degree[j] += 1
        for agent in range(1, n + 1):
            assert len(cs.memberships[agent - 1]) == degree[agent]


def test_from_edges_rejects_self_loops():
    with pytest.raises(ValueError):
        topo.from_edges([(1, 1)], 3)


def test_centralized_row_count():
    assert topo.centralized(6).total_rows == 6


def test_rgg_complete_graph_at_max_radius():
    sample = topo.random_geometric_graph(4, math.sqrt(2.0), seed=0)
    assert len(sample.edges) == 6


def test_rgg_tiny_radius_fails():
    with pytest.raises(NotConnectedError):
        topo.random_geometric_graph(12, 1e-6, seed=0)


def test_rgg_rejects_bad_radius():
    with pytest.raises(ValueError):
        topo.random_geometric_graph(5, 0.0, seed=0)
    with pytest.raises(ValueError):
        topo.random_geometric_graph(5, 2.0, seed=0)


def test_rgg_fixture_is_deterministic():
    sample = topo.random_geometric_graph(20, 0.2, seed=RGG_SEED)
    assert sample.seed == RGG_SEED
    assert tuple(sorted(sample.edges)) == tuple(sorted(RGG_EDGES))
    again = topo.random_geometric_graph(20, 0.2, seed=RGG_SEED)
    assert again.edges == sample.edges
    assert again.points == sample.points
    cs = sample.to_structure()
    assert topo.validate(cs).valid
    assert cs.is_edge_clustering()


def test_rgg_retry_scans_forward_to_connected_seed():
    sample = topo.random_geometric_graph(20, 0.2, seed=RGG_SEED - 3)
    assert sample.seed == RGG_SEED


def test_structure_json_round_trip():
    cs = topo.ComponentStructure(5, 2, ((1, 2), (4, 5), (2, 3, 4)))
    data = json.loads(json.dumps(topo.structure_to_json(cs)))
    assert topo.structure_from_json(data) == cs


def test_rgg_json_round_trip():
    sample = topo.random_geometric_graph(6, 0.9, seed=1)
    data = json.loads(json.dumps(topo.rgg_to_json(sample)))
    assert topo.rgg_from_json(data) == sample


def test_selection_rank_and_subspace_intersection():
    """Valid layouts: the selection matrix has full column rank and its
    column space meets the block-averaging range in exactly the constant
    vectors. Invalid layouts break at least one of the two."""
    rng = np.random.default_rng(9)
    for _ in range(20):
        cs = random_structure(rng, max_agents=9)
        s = topo.selection_matrix(cs)
        _, pi, _ = topo.mixing_matrices(cs)
        assert np.linalg.matrix_rank(s) == cs.n_agents
        inter = (
            np.linalg.matrix_rank(s)
            + np.linalg.matrix_rank(pi)
            - np.linalg.matrix_rank(np.hstack([s, pi]))
        )
        assert inter == 1

    # missing agent 4: rank deficit
    bad_cover = topo.ComponentStructure(4, 1, ((1, 2), (2, 3)))
    assert np.linalg.matrix_rank(topo.selection_matrix(bad_cover)) < 4

    # disconnected clusters: two-dimensional intersection
    bad_conn = topo.ComponentStructure(4, 1, ((1, 2), (3, 4)))
    s = topo.selection_matrix(bad_conn)
    _, pi, _ = topo.mixing_matrices(bad_conn)
    inter = (
        np.linalg.matrix_rank(s)
        + np.linalg.matrix_rank(pi)
        - np.linalg.matrix_rank(np.hstack([s, pi]))
    )
    assert inter == 2
