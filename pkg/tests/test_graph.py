import numpy as np
import pytest

from dsvmflow.errors import DisconnectedGraph, InvalidEdge, ShapeMismatch
from dsvmflow.graph import (
    build_graph,
    h1_gain_bound,
    lambda2,
    laplacian_apply,
    laplacian_matrix,
    topology_edges,
)

from conftest import random_connected_graph


def test_single_edge_laplacian():
    g = build_graph(2, [(0, 1)])
    assert laplacian_matrix(g).tolist() == [[1, -1], [-1, 1]]


def test_complete_triangle_neighbors():
    g = build_graph(3, [(0, 1), (1, 2), (0, 2)])
    assert all(len(ns) == 2 for ns in g.neighbors)


def test_disconnected_raises():
    with pytest.raises(DisconnectedGraph):
        build_graph(3, [(0, 1)])


@pytest.mark.parametrize("bad", [[(0, 0)], [(0, 3)], [(-1, 1)]])
def test_invalid_edges(bad):
    with pytest.raises(InvalidEdge):
        build_graph(3, bad)


def test_duplicate_edges_merge():
    g = build_graph(2, [(0, 1), (1, 0), (0, 1)])
    assert g.edges == ((0, 1),)


def test_apply_consensus_nullspace():
    g = build_graph(2, [(0, 1)])
    c = np.array([[3.5, -1.0], [3.5, -1.0]])
    assert laplacian_apply(g, c).tolist() == [[0.0, 0.0], [0.0, 0.0]]


def test_apply_single_edge_by_hand():
    g = build_graph(2, [(0, 1)])
    assert laplacian_apply(g, np.array([1.0, -1.0])).tolist() == [2.0, -2.0]


def test_apply_triangle_by_hand():
    g = build_graph(3, [(0, 1), (1, 2), (0, 2)])
    assert laplacian_apply(g, np.array([1.0, 0.0, 0.0])).tolist() == [2.0, -1.0, -1.0]


def test_apply_shape_mismatch():
    g = build_graph(2, [(0, 1)])
    with pytest.raises(ShapeMismatch):
        laplacian_apply(g, np.zeros(3))


def test_lambda2_single_edge():
    assert lambda2(build_graph(2, [(0, 1)])) == pytest.approx(2.0, rel=1e-10)


def test_lambda2_triangle():
    # Characteristic polynomial of the K3 Laplacian is -l (l - 3)^2.
    assert lambda2(build_graph(3, topology_edges("complete", 3))) == pytest.approx(3.0, rel=1e-10)


def test_lambda2_path3():
    # 3-node path eigenvalues are {0, 1, 3}.
    assert lambda2(build_graph(3, topology_edges("path", 3))) == pytest.approx(1.0, rel=1e-10)


def test_gain_bound_is_twice_lambda2():
    g = build_graph(3, topology_edges("path", 3))
    assert h1_gain_bound(g) == pytest.approx(2.0 * lambda2(g))


def test_topologies():
    assert topology_edges("complete", 3) == [(0, 1), (0, 2), (1, 2)]
    assert topology_edges("path", 3) == [(0, 1), (1, 2)]
    assert sorted(tuple(sorted(e)) for e in topology_edges("ring", 4)) == [
        (0, 1), (0, 3), (1, 2), (2, 3),
    ]
    with pytest.raises(InvalidEdge):
        topology_edges("ring", 2)
    with pytest.raises(InvalidEdge):
        topology_edges("mesh", 3)


def test_row_sums_exactly_zero():
    rng = np.random.default_rng(5)
    for m in range(1, 7):
        g = random_connected_graph(m, rng)
        lap = laplacian_matrix(g)
        assert lap.dtype == np.int64
        assert np.all(lap.sum(axis=1) == 0)
        assert np.array_equal(lap, lap.T)


def test_quadratic_form_nonnegative():
    rng = np.random.default_rng(6)
    g = random_connected_graph(5, rng)
    lap = laplacian_matrix(g).astype(float)
    for _ in range(100):
        v = rng.normal(size=5)
        assert v @ lap @ v >= -1e-12


def test_lambda2_positive_for_connected():
    rng = np.random.default_rng(7)
    for m in range(2, 7):
        assert lambda2(random_connected_graph(m, rng)) > 0


def test_apply_matches_dense_kron():
    rng = np.random.default_rng(8)
    for m in range(1, 7):
        g = random_connected_graph(m, rng)
        dense = laplacian_matrix(g).astype(float)
        for d in (1, 2, 3):
            v = rng.normal(size=(m, d))
            expected = (np.kron(dense, np.eye(d)) @ v.ravel()).reshape(m, d)
            np.testing.assert_allclose(laplacian_apply(g, v), expected, atol=1e-12)
        flat = rng.normal(size=m)
        np.testing.assert_allclose(laplacian_apply(g, flat), dense @ flat, atol=1e-12)
