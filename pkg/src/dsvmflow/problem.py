"""Network optimization instance, state container and KKT evaluation.

The per-node soft-margin classifier with consensus coupling minimizes

    (1/2) sum_j ||w_j||^2 + (m C) sum_{j,i} xi_ji

subject to the per-sample margin constraints
y_ji (w_j . x_ji + b_j) >= 1 - xi_ji, xi_ji >= 0, and agreement
w_j = w_l, b_j = b_l across every edge (j, l).

Its Lagrangian carries multipliers theta (margins), mu (slack sign),
alpha / beta (consensus), plus quadratic Laplacian damping terms on w and b
that vanish on agreement; see `lagrangian_value` for the exact sum.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParam, ShapeMismatch
from .graph import laplacian_apply

__all__ = [
    "Problem",
    "NetworkState",
    "KktReport",
    "build_problem",
    "zeros_state",
    "random_state",
    "hinge_constraint",
    "margins",
    "coupling_terms",
    "lagrangian_value",
    "objective_value",
    "kkt_residuals",
    "state_inf_distance",
]


@dataclass(frozen=True)
class Problem:
    """Partitioned dataset plus graph and trade-off constant.

    Samples are stored grouped node-by-node: rows `node_offsets[j]` to
    `node_offsets[j+1]` of `features` / `labels` belong to node j, in their
    original within-node order. `origin[k]` is the row's index in the source
    dataset. `penalty` is the slack coefficient m*C.
    """

    graph: object
    partition: object
    C: float
    features: np.ndarray
    labels: np.ndarray
    sample_node: np.ndarray
    node_offsets: np.ndarray
    origin: np.ndarray
    label_features: np.ndarray

    @property
    def node_count(self):
        return self.graph.node_count

    @property
    def feature_dim(self):
        return self.features.shape[1]

    @property
    def sample_count(self):
        return self.features.shape[0]

    @property
    def penalty(self):
        return self.node_count * self.C


def build_problem(partition, graph, C):
    """Assemble a `Problem` from a partition, a graph and the constant C > 0."""
    if partition.node_count != graph.node_count:
        raise ShapeMismatch(
            f"partition has {partition.node_count} nodes, graph has {graph.node_count}"
        )
    if not C > 0:
        raise InvalidParam(f"C must be > 0, got {C}")
    ds = partition.dataset
    origin = np.concatenate([np.asarray(ix, dtype=np.intp) for ix in partition.node_indices])
    features = ds.features[origin].astype(float)
    labels = ds.labels[origin].astype(float)
    sample_node = np.concatenate(
        [np.full(len(ix), j, dtype=np.intp) for j, ix in enumerate(partition.node_indices)]
    )
    node_offsets = np.zeros(graph.node_count + 1, dtype=np.intp)
    np.cumsum([len(ix) for ix in partition.node_indices], out=node_offsets[1:])
    return Problem(
        graph=graph,
        partition=partition,
        C=float(C),
        features=features,
        labels=labels,
        sample_node=sample_node,
        node_offsets=node_offsets,
        origin=origin,
        label_features=labels[:, None] * features,
    )


@dataclass
class NetworkState:
    """Full primal-dual state of the node network.

    w: (m, d) per-node weights; b: (m,) biases; xi / theta / mu: per-sample
    slack and multipliers in the problem's grouped sample order; alpha: (m, d)
    and beta: (m,) consensus multipliers. xi, theta and mu stay >= 0 along
    every trajectory; alpha and beta are unconstrained.

    The same container is used for the flow's derivative values, which share
    all shapes but none of the sign constraints.
    """

    w: np.ndarray
    b: np.ndarray
    xi: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def copy(self):
        return NetworkState(
            self.w.copy(), self.b.copy(), self.xi.copy(), self.theta.copy(),
            self.mu.copy(), self.alpha.copy(), self.beta.copy(),
        )

    def arrays(self):
        return (self.w, self.b, self.xi, self.theta, self.mu, self.alpha, self.beta)


# A derivative has the same shape as the state it was evaluated at.
StateDerivative = NetworkState


def zeros_state(problem):
    """All-zero state: feasible for every nonnegativity constraint."""
    m, d, n = problem.node_count, problem.feature_dim, problem.sample_count
    return NetworkState(
        w=np.zeros((m, d)), b=np.zeros(m), xi=np.zeros(n), theta=np.zeros(n),
        mu=np.zeros(n), alpha=np.zeros((m, d)), beta=np.zeros(m),
    )


def random_state(problem, scale, seed):
    """Seeded random state; projected variables get |N(0, scale^2)| draws."""
    rng = np.random.default_rng(int(seed))
    m, d, n = problem.node_count, problem.feature_dim, problem.sample_count
    return NetworkState(
        w=scale * rng.standard_normal((m, d)),
        b=scale * rng.standard_normal(m),
        xi=np.abs(scale * rng.standard_normal(n)),
        theta=np.abs(scale * rng.standard_normal(n)),
        mu=np.abs(scale * rng.standard_normal(n)),
        alpha=scale * rng.standard_normal((m, d)),
        beta=scale * rng.standard_normal(m),
    )


def check_shapes(state, problem):
    """Raise ShapeMismatch unless `state` matches `problem` dimensions."""
    m, d, n = problem.node_count, problem.feature_dim, problem.sample_count
    expected = ((m, d), (m,), (n,), (n,), (n,), (m, d), (m,))
    for arr, shape in zip(state.arrays(), expected):
        if arr.shape != shape:
            raise ShapeMismatch(f"state array has shape {arr.shape}, expected {shape}")


def hinge_constraint(xi, w, b, x, y):
    """Margin-constraint value 1 - xi - y (w . x + b) for one sample.

    Nonpositive means the sample's soft-margin constraint is satisfied.
    """
    return 1.0 - xi - y * (float(np.dot(np.ravel(w), np.ravel(x))) + b)


def margins(state, problem):
    """Vector of constraint values h_ji = 1 - xi_ji - y_ji (w_j . x_ji + b_j)."""
    node = problem.sample_node
    scores = np.einsum("kd,kd->k", problem.features, state.w[node]) + state.b[node]
    return 1.0 - state.xi - problem.labels * scores


def coupling_terms(state, problem):
    """Per-node data coupling: zeta_j = sum_i theta_ji (-y_ji x_ji), eta_j likewise.

    Summation runs in ascending sample order within each node.
    """
    starts = problem.node_offsets[:-1]
    zeta = -np.add.reduceat(state.theta[:, None] * problem.label_features, starts, axis=0)
    eta = -np.add.reduceat(state.theta * problem.labels, starts)
    return zeta, eta


def lagrangian_value(state, problem):
    """Value of the saddle function the flow descends/ascends.

    (1/2)||w||^2 + mC sum xi + alpha'(L w) + beta'(L b) + sum theta h
    + sum mu xi + (1/2) w'(L w) + (1/2) b'(L b), with h including the slack
    term. The two quadratic Laplacian terms vanish on agreement and act as
    damping in the resulting dynamics.
    """
    check_shapes(state, problem)
    h = margins(state, problem)
    lw = laplacian_apply(problem.graph, state.w)
    lb = laplacian_apply(problem.graph, state.b)
    return float(
        0.5 * np.sum(state.w * state.w)
        + problem.penalty * np.sum(state.xi)
        + np.sum(state.alpha * lw)
        + np.dot(state.beta, lb)
        + np.dot(state.theta, h)
        + np.dot(state.mu, state.xi)
        + 0.5 * np.sum(state.w * lw)
        + 0.5 * np.dot(state.b, lb)
    )


def objective_value(state, problem):
    """Network objective (1/2) sum_j ||w_j||^2 + mC sum_ji xi_ji."""
    check_shapes(state, problem)
    return float(0.5 * np.sum(state.w * state.w) + problem.penalty * np.sum(state.xi))


@dataclass(frozen=True)
class KktReport:
    """Residuals of the first-order optimality system, all nonnegative.

    stationarity_residual: inf-norm of the bound-projected gradient over
    (w, b, xi) plus the consensus-multiplier rows Lw, Lb. Multiplier
    optimality for theta and mu is captured by the feasibility and
    complementarity fields, so it is not double-counted here; at a bound 0
    with outward-pointing gradient the contribution is 0.
    """

    stationarity_residual: float
    primal_infeasibility: float
    dual_infeasibility: float
    complementarity: float
    consensus: float

    def max_residual(self):
        return max(
            self.stationarity_residual, self.primal_infeasibility,
            self.dual_infeasibility, self.complementarity, self.consensus,
        )

    def as_dict(self):
        return {
            "stationarity_residual": self.stationarity_residual,
            "primal_infeasibility": self.primal_infeasibility,
            "dual_infeasibility": self.dual_infeasibility,
            "complementarity": self.complementarity,
            "consensus": self.consensus,
        }


def kkt_residuals(state, problem, derivative=None):
    """Measure how far a state is from the optimality conditions.

    The point is optimal within tolerance tau iff every field is <= tau.
    `derivative`, when given, must be the projected field value at `state`
    (it is reused instead of re-deriving the gradient).
    """
    from .dynamics import raw_drifts  # local import: dynamics builds on this module

    check_shapes(state, problem)
    h = margins(state, problem)

    # Projected-gradient stationarity: |raw drift| on free coordinates, the
    # clamped drift magnitude at active bounds (xi only; w, b, alpha, beta
    # are unconstrained so drift magnitude is gradient magnitude). For the
    # projected field these coincide with the field's own entries.
    if derivative is None:
        drifts = raw_drifts(state, problem)
        xi_res = np.where(state.xi > 0.0, np.abs(drifts.xi), np.maximum(drifts.xi, 0.0))
    else:
        drifts = derivative
        xi_res = drifts.xi
    stationarity = max(
        _absmax(drifts.w), _absmax(drifts.b), _absmax(xi_res),
        _absmax(drifts.alpha), _absmax(drifts.beta),
    )

    primal = max(
        float(np.max(h, initial=0.0)),
        float(np.max(-state.xi, initial=0.0)),
        0.0,
    )
    dual = max(
        float(np.max(-state.theta, initial=0.0)),
        float(np.max(-state.mu, initial=0.0)),
        0.0,
    )
    complementarity = max(
        _absmax(state.theta * h),
        _absmax(state.xi * state.mu),
    )

    consensus = 0.0
    for a, bnode in problem.graph.edges:
        consensus = max(
            consensus,
            _absmax(state.w[a] - state.w[bnode]),
            abs(float(state.b[a] - state.b[bnode])),
        )

    return KktReport(
        stationarity_residual=float(stationarity),
        primal_infeasibility=float(primal),
        dual_infeasibility=float(dual),
        complementarity=float(complementarity),
        consensus=float(consensus),
    )


def state_inf_distance(first, second):
    """Inf-norm of the componentwise difference between two states."""
    return max(
        float(np.max(np.abs(a - b), initial=0.0))
        for a, b in zip(first.arrays(), second.arrays())
    )


def _absmax(arr):
    return float(np.max(np.abs(arr), initial=0.0))
