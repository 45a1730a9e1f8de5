"""Independent reference solver for the single-machine soft-margin problem.

Solves  min (1/2)||w||^2 + mC sum_i xi_i
        s.t. y_i (w . x_i + b) >= 1 - xi_i,  xi_i >= 0

by exhaustive enumeration: each sample is classified as strictly outside the
margin (multiplier 0, slack 0), exactly on the margin (slack 0, multiplier
free in [0, mC]), or violating (multiplier at mC, positive slack). Every
classification yields a small linear system; feasible candidates are
compared exactly. Exponential in the sample count and intended as ground
truth at desk scale, not as a practical trainer.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import EmbedFailure, InvalidParam, NoSolution, OracleScaleExceeded
from .problem import NetworkState, kkt_residuals

__all__ = ["CentralSolution", "solve_centralized", "embed_consensus"]

_FEAS_TOL = 1e-9  # acceptance slack for candidate sign/feasibility checks
_CERT_TOL = 1e-8  # self-certificate bound every returned solution satisfies

# Per-sample roles in an enumeration assignment.
_OUTSIDE, _MARGIN, _VIOLATING = 0, 1, 2


@dataclass(frozen=True)
class CentralSolution:
    """Reference optimum with multipliers and a self-certified KKT residual.

    theta obeys 0 <= theta_i <= mC with complementary slackness; mu is the
    slack-sign multiplier mC - theta (from the stationarity of xi).
    degenerate_b marks datasets whose optimal bias is not unique, in which
    case downstream comparisons should use objectives, not (w, b).
    """

    w: np.ndarray
    b: float
    xi: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    objective: float
    kkt_residual: float
    degenerate_b: bool


def solve_centralized(dataset, C, m, sample_cap=12):
    """Solve the reference problem with slack coefficient m*C.

    Parameters
    ----------
    dataset : data.Dataset
    C : float
        Trade-off constant; must be positive.
    m : int
        Node count, entering only through the penalty scale m*C.
    sample_cap : int
        Refuse datasets larger than this (enumeration is 3**n).

    Raises
    ------
    OracleScaleExceeded, InvalidParam, NoSolution
    """
    n = len(dataset)
    if n == 0:
        raise InvalidParam("dataset is empty")
    if n > sample_cap:
        raise OracleScaleExceeded(f"{n} samples exceed the enumeration cap {sample_cap}")
    if not C > 0:
        raise InvalidParam(f"C must be > 0, got {C}")
    rho = m * float(C)
    x = dataset.features.astype(float)
    y = dataset.labels.astype(float)
    gram = (y[:, None] * x) @ (y[:, None] * x).T  # y_i y_j x_i.x_j

    candidates = []
    for roles in itertools.product((_OUTSIDE, _MARGIN, _VIOLATING), repeat=n):
        roles = np.array(roles)
        candidates.extend(_solve_assignment(roles, x, y, gram, rho))

    best = None
    for cand in candidates:
        key = (cand["objective"], cand["wnorm"], cand["b"])
        if best is None or key < (best["objective"], best["wnorm"], best["b"]):
            best = cand
    if best is None:
        raise NoSolution(
            "no feasible assignment found; this cannot happen for C > 0 "
            "(internal error)"
        )

    degenerate = False
    for cand in candidates:
        close = cand["objective"] <= best["objective"] + 1e-9 * (1.0 + abs(best["objective"]))
        if close and (abs(cand["b"] - best["b"]) > 1e-6 or cand.get("b_interval", False)):
            degenerate = True

    theta = best["theta"]
    w = best["w"]
    b = best["b"]
    xi = np.maximum(0.0, 1.0 - y * (x @ w + b))
    xi[best["roles"] != _VIOLATING] = 0.0
    mu = rho - theta
    objective = float(0.5 * np.dot(w, w) + rho * np.sum(xi))
    cert = _central_kkt(w, b, xi, theta, mu, x, y, rho)
    if cert > _CERT_TOL:
        raise NoSolution(f"best candidate failed its own certificate ({cert:.3e})")
    return CentralSolution(
        w=w, b=float(b), xi=xi, theta=theta, mu=mu,
        objective=objective, kkt_residual=cert, degenerate_b=bool(degenerate),
    )


def _solve_assignment(roles, x, y, gram, rho):
    """Candidate solutions for one sample-role assignment (usually 0 or 1)."""
    margin = np.flatnonzero(roles == _MARGIN)
    violating = np.flatnonzero(roles == _VIOLATING)
    outside = np.flatnonzero(roles == _OUTSIDE)
    k = len(margin)
    balance_rhs = -rho * float(np.sum(y[violating]))

    if k == 0:
        # No margin samples: w is fixed and the equality sum theta_i y_i = 0
        # must already balance; b is then only constrained by inequalities.
        if abs(balance_rhs) > _FEAS_TOL:
            return []
        w = rho * np.sum((y[violating, None] * x[violating]), axis=0) \
            if len(violating) else np.zeros(x.shape[1])
        return _candidates_free_bias(roles, w, x, y, rho, outside, violating)

    # Unknowns (theta_margin, b): margin equations plus the dual balance.
    a = np.zeros((k + 1, k + 1))
    rhs = np.zeros(k + 1)
    a[:k, :k] = gram[np.ix_(margin, margin)]
    a[:k, k] = y[margin]
    rhs[:k] = 1.0 - rho * gram[np.ix_(margin, violating)].sum(axis=1)
    a[k, :k] = y[margin]
    rhs[k] = balance_rhs
    solution, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    if np.max(np.abs(a @ solution - rhs)) > _FEAS_TOL * max(1.0, np.max(np.abs(rhs))):
        return []
    theta_margin = solution[:k]
    b = float(solution[k])
    if np.min(theta_margin) < -_FEAS_TOL or np.max(theta_margin) > rho + _FEAS_TOL:
        return []
    theta_margin = np.clip(theta_margin, 0.0, rho)
    w = (theta_margin * y[margin]) @ x[margin]
    if len(violating):
        w = w + rho * np.sum(y[violating, None] * x[violating], axis=0)
    cand = _validated(roles, w, b, x, y, rho, outside, violating, theta_margin=theta_margin)
    return [cand] if cand is not None else []


def _candidates_free_bias(roles, w, x, y, rho, outside, violating):
    """Feasible-bias interval endpoints when no margin equation pins b.

    The dual balance forces the violating labels to sum to zero, so the
    objective is constant in b over the feasible interval; finite endpoints
    are proposed and global tie-breaking keeps the smallest bias.
    """
    scores = x @ w
    lo, hi = -np.inf, np.inf
    for i in outside:
        if y[i] > 0:
            lo = max(lo, 1.0 - scores[i])
        else:
            hi = min(hi, -1.0 - scores[i])
    for i in violating:
        if y[i] > 0:
            hi = min(hi, 1.0 - scores[i])
        else:
            lo = max(lo, -1.0 - scores[i])
    if lo > hi + _FEAS_TOL:
        return []
    feasible_interval = bool(np.isfinite(lo) and np.isfinite(hi) and hi - lo > 1e-9) \
        or not (np.isfinite(lo) and np.isfinite(hi))
    endpoints = [v for v in (lo, hi) if np.isfinite(v)]
    if not endpoints:
        endpoints = [0.0]
    out = []
    for b in dict.fromkeys(endpoints):  # preserve order, drop duplicates
        cand = _validated(roles, w, float(b), x, y, rho, outside, violating)
        if cand is not None:
            cand["b_interval"] = feasible_interval
            out.append(cand)
    return out


def _validated(roles, w, b, x, y, rho, outside, violating, theta_margin=None):
    scores = y * (x @ w + b)
    if len(outside) and np.min(scores[outside]) < 1.0 - _FEAS_TOL:
        return None
    if len(violating) and np.max(scores[violating]) > 1.0 + _FEAS_TOL:
        return None
    theta = np.zeros(len(y))
    if theta_margin is not None:
        theta[roles == _MARGIN] = theta_margin
    theta[violating] = rho
    xi = np.maximum(0.0, 1.0 - scores)
    xi[roles != _VIOLATING] = 0.0
    objective = float(0.5 * np.dot(w, w) + rho * np.sum(xi))
    return {
        "roles": roles,
        "w": np.asarray(w, dtype=float),
        "b": float(b),
        "theta": theta,
        "objective": objective,
        "wnorm": float(np.linalg.norm(w)),
    }


def _central_kkt(w, b, xi, theta, mu, x, y, rho):
    """Single-machine KKT residual (the oracle's self-certificate)."""
    h = 1.0 - xi - y * (x @ w + b)
    stationarity = max(
        float(np.max(np.abs(w - (theta * y) @ x))),
        abs(float(np.dot(theta, y))),
        float(np.max(np.abs(rho - theta - mu))),
    )
    primal = max(float(np.max(h, initial=0.0)), float(np.max(-xi, initial=0.0)), 0.0)
    dual = max(float(np.max(-theta, initial=0.0)), float(np.max(-mu, initial=0.0)), 0.0)
    comp = max(float(np.max(np.abs(theta * h))), float(np.max(np.abs(xi * mu))))
    return max(stationarity, primal, dual, comp)


def embed_consensus(solution, problem, kkt_tol=1e-4, lstsq_tol=1e-6):
    """Lift a reference optimum onto the network as a full agreement state.

    (w*, b*) is replicated to every node and each node receives the slack
    and margin multipliers of the samples it owns, scaled by the node count
    so that the per-node stationarity system for the consensus multipliers
    (L alpha_dim = r_dim, L beta = r_b) is balanced; alpha and beta are its
    minimum-norm least-squares solutions. mu is set to mC - theta from the
    stationarity of xi.

    Raises
    ------
    EmbedFailure
        If a scaled multiplier leaves [0, mC], a least-squares residual
        exceeds `lstsq_tol`, or the embedded state's KKT residuals exceed
        `kkt_tol` (all of which signal an oracle/problem mismatch).
    """
    m = problem.node_count
    if len(solution.theta) != problem.sample_count:
        raise EmbedFailure(
            f"solution covers {len(solution.theta)} samples, problem has "
            f"{problem.sample_count}"
        )
    theta = m * solution.theta[problem.origin]
    xi = solution.xi[problem.origin].astype(float)
    mu = problem.penalty - theta
    if float(np.min(mu)) < -1e-9:
        raise EmbedFailure(
            "scaled margin multiplier exceeds the penalty scale; the "
            "reference solution is inconsistent with this problem's C"
        )
    mu = np.maximum(mu, 0.0)

    w = np.tile(np.asarray(solution.w, dtype=float), (m, 1))
    b = np.full(m, float(solution.b))

    # Stationarity of w_j at agreement: (L alpha)_j = -w* + sum_i theta_ji y x.
    starts = problem.node_offsets[:-1]
    moments = np.add.reduceat(theta[:, None] * problem.label_features, starts, axis=0)
    r_alpha = moments - solution.w[None, :]
    r_beta = np.add.reduceat(theta * problem.labels, starts)

    lap = _dense_laplacian(problem.graph)
    alpha, res_a = _lstsq_residual(lap, r_alpha)
    beta, res_b = _lstsq_residual(lap, r_beta)
    if max(res_a, res_b) > lstsq_tol:
        raise EmbedFailure(
            f"consensus-multiplier system inconsistent (residual {max(res_a, res_b):.3e})"
        )

    state = NetworkState(w=w, b=b, xi=xi, theta=theta, mu=mu, alpha=alpha, beta=beta)
    report = kkt_residuals(state, problem)
    if report.max_residual() > kkt_tol:
        raise EmbedFailure(
            f"embedded state fails KKT at {report.max_residual():.3e} "
            f"(fields: {report.as_dict()})"
        )
    return state


def _dense_laplacian(graph):
    from .graph import laplacian_matrix

    return laplacian_matrix(graph).astype(float)


def _lstsq_residual(lap, rhs):
    rhs = np.asarray(rhs, dtype=float)
    flat = rhs if rhs.ndim == 2 else rhs[:, None]
    solution, *_ = np.linalg.lstsq(lap, flat, rcond=None)
    residual = float(np.max(np.abs(lap @ solution - flat), initial=0.0))
    if rhs.ndim == 1:
        return solution[:, 0], residual
    return solution, residual
