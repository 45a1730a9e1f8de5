"""Compiled Euler inner loop.

The public field evaluation works on tiny per-node arrays, where interpreter
overhead dominates; this kernel advances whole record intervals in one call.
It mirrors `dynamics.vector_field` + the clamped Euler update exactly,
including ascending summation order over samples and neighbors, and is
cross-checked against the pure numpy path in the test suite. Everything
falls back to numpy when numba is unavailable.
"""

import numpy as np

try:
    from numba import njit

    ENABLED = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    ENABLED = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


RUNNING, CONVERGED, NONFINITE = 0, 1, 2


@njit(cache=True)
def euler_chunk(
    w, b, xi, theta, mu, alpha, beta,
    features, label_features, labels, node_offsets,
    adjacency, adj_offsets,
    penalty, h, max_steps, stop_tol,
):
    """Advance up to max_steps clamped Euler steps in place.

    Returns (steps_taken, status). The convergence test runs against the
    projected field at the current state *before* stepping, so a CONVERGED
    return leaves the state exactly at the point whose field passed the
    tolerance. NONFINITE reports a non-finite field value.
    """
    m, d = w.shape
    n = xi.shape[0]

    dw = np.empty((m, d))
    db = np.empty(m)
    dxi = np.empty(n)
    dtheta = np.empty(n)
    dmu = np.empty(n)
    dalpha = np.empty((m, d))
    dbeta = np.empty(m)

    for step_index in range(max_steps):
        norm = 0.0

        # Laplacian images and data-coupling terms, ascending index order.
        for j in range(m):
            deg = adj_offsets[j + 1] - adj_offsets[j]
            lb_j = deg * b[j]
            lbeta_j = deg * beta[j]
            for ptr in range(adj_offsets[j], adj_offsets[j + 1]):
                l = adjacency[ptr]
                lb_j -= b[l]
                lbeta_j -= beta[l]
            eta_j = 0.0
            for idx in range(node_offsets[j], node_offsets[j + 1]):
                eta_j -= theta[idx] * labels[idx]
            for c in range(d):
                lw_jc = deg * w[j, c]
                lalpha_jc = deg * alpha[j, c]
                for ptr in range(adj_offsets[j], adj_offsets[j + 1]):
                    l = adjacency[ptr]
                    lw_jc -= w[l, c]
                    lalpha_jc -= alpha[l, c]
                zeta_jc = 0.0
                for idx in range(node_offsets[j], node_offsets[j + 1]):
                    zeta_jc -= theta[idx] * label_features[idx, c]
                dw[j, c] = -w[j, c] - zeta_jc - lalpha_jc - lw_jc
                dalpha[j, c] = lw_jc
                a = abs(dw[j, c])
                if a > norm:
                    norm = a
                a = abs(lw_jc)
                if a > norm:
                    norm = a
            db[j] = -eta_j - lbeta_j - lb_j
            dbeta[j] = lb_j
            a = abs(db[j])
            if a > norm:
                norm = a
            a = abs(lb_j)
            if a > norm:
                norm = a

        for j in range(m):
            for idx in range(node_offsets[j], node_offsets[j + 1]):
                score = b[j]
                for c in range(d):
                    score += features[idx, c] * w[j, c]
                hmargin = 1.0 - xi[idx] - labels[idx] * score

                drift = -penalty - mu[idx] + theta[idx]
                if xi[idx] <= 0.0 and drift < 0.0:
                    drift = 0.0
                dxi[idx] = drift

                drift = hmargin
                if theta[idx] <= 0.0 and drift < 0.0:
                    drift = 0.0
                dtheta[idx] = drift

                drift = xi[idx]
                if mu[idx] <= 0.0 and drift < 0.0:
                    drift = 0.0
                dmu[idx] = drift

                a = abs(dxi[idx])
                if a > norm:
                    norm = a
                a = abs(dtheta[idx])
                if a > norm:
                    norm = a
                a = abs(dmu[idx])
                if a > norm:
                    norm = a

        if not np.isfinite(norm):
            return step_index, NONFINITE
        if norm <= stop_tol:
            return step_index, CONVERGED

        for j in range(m):
            for c in range(d):
                w[j, c] += h * dw[j, c]
                alpha[j, c] += h * dalpha[j, c]
            b[j] += h * db[j]
            beta[j] += h * dbeta[j]
        for idx in range(n):
            xi[idx] = max(0.0, xi[idx] + h * dxi[idx])
            theta[idx] = max(0.0, theta[idx] + h * dtheta[idx])
            mu[idx] = max(0.0, mu[idx] + h * dmu[idx])

    return max_steps, RUNNING
