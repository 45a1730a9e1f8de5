"""Projected saddle-point vector field and switching-signal bookkeeping.

The flow descends the saddle function in (w, b, xi) and ascends it in
(theta, mu, alpha, beta). Variables constrained to the nonnegative orthant
(xi, theta, mu) evolve under a positive projection: their drift is replaced
by max(0, drift) whenever they sit at 0, which turns the dynamics into a
switched system. Per node j and local sample i the field reads

    w_j'     = -w_j - zeta_j - sum_{l in N_j} (alpha_j - alpha_l)
                             - sum_{l in N_j} (w_j - w_l)
    b_j'     = -eta_j - sum_{l in N_j} (beta_j - beta_l)
                      - sum_{l in N_j} (b_j - b_l)
    xi_ji'   = [ -mC - mu_ji + theta_ji ]+
    theta_ji'= [ h_ji ]+
    mu_ji'   = [ xi_ji ]+
    alpha_j' = sum_{l in N_j} (w_j - w_l)
    beta_j'  = sum_{l in N_j} (b_j - b_l)

with zeta_j = sum_i theta_ji (-y_ji x_ji), eta_j = sum_i theta_ji (-y_ji).
"""

from dataclasses import dataclass

import numpy as np

from .errors import NegativeState
from .graph import laplacian_apply
from .problem import (
    NetworkState,
    StateDerivative,
    check_shapes,
    coupling_terms,
    margins,
)

__all__ = [
    "SwitchSignals",
    "positive_projection",
    "raw_drifts",
    "vector_field",
    "active_switch_sets",
    "field_inf_norm",
]


def positive_projection(x, f):
    """Project a scalar drift f at a nonnegative variable x.

    Returns f unchanged for x > 0 and max(0, f) at the boundary x = 0.

    Raises
    ------
    NegativeState
        If x < 0; the integrator keeps projected variables clamped at 0,
        so a negative value means that contract was broken.
    """
    if x < 0:
        raise NegativeState(f"projected variable is negative: {x}")
    if x > 0:
        return f
    return max(0.0, f)


def _project(values, drifts):
    return np.where(values > 0.0, drifts, np.maximum(drifts, 0.0))


def raw_drifts(state, problem):
    """Unprojected drift of every variable (the +-gradient flow itself).

    Used by higher-order steppers and by optimality checks; `vector_field`
    applies the positive projection on top of these values.
    """
    zeta, eta = coupling_terms(state, problem)
    lw = laplacian_apply(problem.graph, state.w)
    lb = laplacian_apply(problem.graph, state.b)
    lalpha = laplacian_apply(problem.graph, state.alpha)
    lbeta = laplacian_apply(problem.graph, state.beta)
    return StateDerivative(
        w=-state.w - zeta - lalpha - lw,
        b=-eta - lbeta - lb,
        xi=(-problem.penalty) - state.mu + state.theta,
        theta=margins(state, problem),
        mu=state.xi.copy(),
        alpha=lw,
        beta=lb,
    )


def vector_field(state, problem):
    """Projected field value at a state; zero exactly at optimality points.

    Raises
    ------
    ShapeMismatch
        If the state does not match the problem dimensions.
    NegativeState
        If any of xi, theta, mu is negative.
    """
    check_shapes(state, problem)
    smallest = min(
        float(np.min(state.xi)), float(np.min(state.theta)), float(np.min(state.mu))
    )
    if smallest < 0.0:
        raise NegativeState(f"projected variable is negative: {smallest}")
    d = raw_drifts(state, problem)
    d.xi = _project(state.xi, d.xi)
    d.theta = _project(state.theta, d.theta)
    d.mu = _project(state.mu, d.mu)
    return d


@dataclass(frozen=True)
class SwitchSignals:
    """Per-node sets of local sample indices with an active projection.

    sigma_j: theta_ji pinned at 0 (its drift h_ji <= 0); iota_j: mu_ji pinned
    (xi_ji <= 0, i.e. exactly 0); rho_j: xi_ji pinned (-mC - mu + theta <= 0).
    The projected field is exactly 0 on these index sets.
    """

    sigma: tuple
    iota: tuple
    rho: tuple


def active_masks(state, problem):
    """Boolean per-sample masks (sigma, iota, rho) over the grouped order."""
    drifts_xi = (-problem.penalty) - state.mu + state.theta
    h = margins(state, problem)
    sigma = (state.theta == 0.0) & (h <= 0.0)
    iota = (state.mu == 0.0) & (state.xi <= 0.0)
    rho = (state.xi == 0.0) & (drifts_xi <= 0.0)
    return sigma, iota, rho


def active_switch_sets(state, problem):
    """Switching signals at a state, as per-node index sets."""
    sigma, iota, rho = active_masks(state, problem)
    return SwitchSignals(
        sigma=_split(sigma, problem),
        iota=_split(iota, problem),
        rho=_split(rho, problem),
    )


def _split(mask, problem):
    offsets = problem.node_offsets
    return tuple(
        tuple(int(i) for i in np.flatnonzero(mask[offsets[j]:offsets[j + 1]]))
        for j in range(problem.node_count)
    )


def field_inf_norm(derivative):
    """Inf-norm of a field value across every state component."""
    return max(float(np.max(np.abs(a), initial=0.0)) for a in derivative.arrays())
