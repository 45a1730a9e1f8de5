import numpy as np
import pytest

from dsvmflow.dynamics import (
    active_switch_sets,
    field_inf_norm,
    positive_projection,
    raw_drifts,
    vector_field,
)
from dsvmflow.errors import NegativeState, ShapeMismatch
from dsvmflow.graph import laplacian_apply
from dsvmflow.oracle import embed_consensus, solve_centralized
from dsvmflow.problem import lagrangian_value, zeros_state

from conftest import make_problem, random_boundary_state, random_interior_state


def test_projection_inward_drift_at_boundary():
    assert positive_projection(0.0, -3.0) == 0.0


def test_projection_outward_drift_at_boundary():
    assert positive_projection(0.0, 2.0) == 2.0


def test_projection_interior():
    assert positive_projection(1.5, -3.0) == -3.0


def test_projection_negative_state():
    with pytest.raises(NegativeState):
        positive_projection(-1e-9, 0.0)


def test_field_at_zero_state(single_node_problem):
    d = vector_field(zeros_state(single_node_problem), single_node_problem)
    assert d.w.tolist() == [[0.0]]
    assert d.b.tolist() == [0.0]
    assert d.xi.tolist() == [0.0]       # clamped from -mC
    assert d.theta.tolist() == [1.0]    # h = 1 at the origin
    assert d.mu.tolist() == [0.0]
    assert d.alpha.tolist() == [[0.0]]
    assert d.beta.tolist() == [0.0]


def test_field_with_active_multiplier(single_node_problem):
    s = zeros_state(single_node_problem)
    s.theta[0] = 1.0
    d = vector_field(s, single_node_problem)
    assert d.w.tolist() == [[1.0]]  # -w - zeta = 0 - (-1)
    assert d.b.tolist() == [1.0]


def test_field_vanishes_at_embedded_optimum(two_point_problem):
    sol = solve_centralized(two_point_problem.partition.dataset,
                            two_point_problem.C, two_point_problem.node_count)
    state = embed_consensus(sol, two_point_problem)
    assert field_inf_norm(vector_field(state, two_point_problem)) <= 1e-6


def test_field_shape_and_negative_state(two_point_problem, single_node_problem):
    with pytest.raises(ShapeMismatch):
        vector_field(zeros_state(single_node_problem), two_point_problem)
    s = zeros_state(two_point_problem)
    s.theta[0] = -1e-12
    with pytest.raises(NegativeState):
        vector_field(s, two_point_problem)


def test_switch_sets_examples(single_node_problem):
    # theta at 0 with h = 1 > 0: projection inactive.
    s = zeros_state(single_node_problem)
    sets = active_switch_sets(s, single_node_problem)
    assert sets.sigma == ((),)
    assert sets.iota == ((0,),)   # mu = 0, xi = 0
    assert sets.rho == ((0,),)    # drift -mC < 0 at xi = 0

    # theta at 0 with h = -0.5: projection active.
    s2 = zeros_state(single_node_problem)
    s2.xi[0] = 1.5
    sets2 = active_switch_sets(s2, single_node_problem)
    assert sets2.sigma == ((0,),)
    assert sets2.rho == ((),)     # xi > 0


def test_projection_switch_consistency_random_states():
    prob = make_problem(
        [[1.0, -0.5], [0.5, 2.0], [-2.0, 1.0], [0.3, 0.3], [-1.0, -1.0]],
        [1.0, -1.0, 1.0, -1.0, 1.0],
        3, [(0, 1), (1, 2), (0, 2)], 2.0,
    )
    rng = np.random.default_rng(12)
    for _ in range(200):
        s = random_boundary_state(prob, rng)
        d = vector_field(s, prob)
        raw = raw_drifts(s, prob)
        sets = active_switch_sets(s, prob)
        for arr_d, arr_raw, per_node in (
            (d.xi, raw.xi, sets.rho),
            (d.theta, raw.theta, sets.sigma),
            (d.mu, raw.mu, sets.iota),
        ):
            for j in range(prob.node_count):
                lo, hi = prob.node_offsets[j], prob.node_offsets[j + 1]
                active = set(per_node[j])
                for i in range(hi - lo):
                    if i in active:
                        assert arr_d[lo + i] == 0.0
                    else:
                        assert arr_d[lo + i] == arr_raw[lo + i]


def test_unprojected_field_matches_finite_differences():
    prob = make_problem(
        [[1.0, 0.3], [-0.4, 1.2], [0.9, -0.8], [-1.5, -0.2], [0.2, 0.7]],
        [1.0, -1.0, 1.0, -1.0, 1.0],
        3, [(0, 1), (1, 2)], 2.0,
    )
    rng = np.random.default_rng(21)
    signs = {"w": -1.0, "b": -1.0, "xi": -1.0, "theta": 1.0, "mu": 1.0,
             "alpha": 1.0, "beta": 1.0}
    for _ in range(25):
        s = random_interior_state(prob, rng)
        d = raw_drifts(s, prob)
        for name, sign in signs.items():
            arr = getattr(s, name)
            drift = getattr(d, name)
            flat = arr.ravel()
            for idx in range(flat.size):
                eps = 1e-6 * max(1.0, abs(flat[idx]))
                orig = flat[idx]
                flat[idx] = orig + eps
                up = lagrangian_value(s, prob)
                flat[idx] = orig - eps
                down = lagrangian_value(s, prob)
                flat[idx] = orig
                fd = sign * (up - down) / (2.0 * eps)
                an = drift.ravel()[idx]
                assert abs(fd - an) <= 1e-6 * max(1.0, abs(an))


def test_alpha_drift_is_laplacian_of_w():
    prob = make_problem([[1.0], [2.0], [3.0]], [1.0, -1.0, 1.0],
                        3, [(0, 1), (1, 2)], 1.0)
    rng = np.random.default_rng(31)
    for _ in range(20):
        s = random_interior_state(prob, rng)
        d = vector_field(s, prob)
        np.testing.assert_allclose(d.alpha, laplacian_apply(prob.graph, s.w), atol=0)
        np.testing.assert_allclose(d.beta, laplacian_apply(prob.graph, s.b), atol=0)


def test_consensus_state_has_zero_dual_drift():
    prob = make_problem([[1.0], [2.0], [3.0]], [1.0, -1.0, 1.0],
                        3, [(0, 1), (1, 2)], 1.0)
    s = zeros_state(prob)
    s.w[:] = 1.23
    s.b[:] = -0.5
    s.theta[:] = 0.4
    d = vector_field(s, prob)
    assert np.all(d.alpha == 0.0)
    assert np.all(d.beta == 0.0)
