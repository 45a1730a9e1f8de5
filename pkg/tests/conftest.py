import numpy as np
import pytest

from dsvmflow import build_graph, build_problem, partition
from dsvmflow.data import Dataset
from dsvmflow.graph import topology_edges
from dsvmflow.problem import NetworkState


def make_problem(features, labels, m, edges, C, strategy="round_robin"):
    ds = Dataset(np.asarray(features, dtype=float), np.asarray(labels, dtype=float))
    graph = build_graph(m, edges)
    return build_problem(partition(ds, m, strategy), graph, C)


@pytest.fixture
def single_node_problem():
    """One node, one sample x=[1], y=+1, C=1."""
    return make_problem([[1.0]], [1.0], 1, [], 1.0)


@pytest.fixture
def two_point_problem():
    """The canonical separable pair on a single edge, C=10, one sample each."""
    return make_problem([[1.0], [-1.0]], [1.0, -1.0], 2, [(0, 1)], 10.0)


def named_graph(name):
    if name == "P2":
        return build_graph(2, topology_edges("path", 2))
    if name == "P3":
        return build_graph(3, topology_edges("path", 3))
    if name == "K3":
        return build_graph(3, topology_edges("complete", 3))
    raise ValueError(name)


def random_interior_state(problem, rng, low=0.1, high=2.0):
    """State with every projected variable strictly positive."""
    m, d, n = problem.node_count, problem.feature_dim, problem.sample_count
    return NetworkState(
        w=rng.normal(size=(m, d)),
        b=rng.normal(size=m),
        xi=rng.uniform(low, high, size=n),
        theta=rng.uniform(low, high, size=n),
        mu=rng.uniform(low, high, size=n),
        alpha=rng.normal(size=(m, d)),
        beta=rng.normal(size=m),
    )


def random_boundary_state(problem, rng, zero_fraction=0.5):
    """Random feasible state with a fraction of projected entries at exact 0."""
    state = random_interior_state(problem, rng)
    for arr in (state.xi, state.theta, state.mu):
        mask = rng.random(arr.shape) < zero_fraction
        arr[mask] = 0.0
    return state


def random_connected_graph(m, rng):
    """Random spanning tree plus a few extra edges."""
    edges = set()
    for j in range(1, m):
        edges.add((int(rng.integers(0, j)), j))
    extras = int(rng.integers(0, m))
    for _ in range(extras):
        a, b = rng.integers(0, m, size=2)
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return build_graph(m, sorted(edges))
