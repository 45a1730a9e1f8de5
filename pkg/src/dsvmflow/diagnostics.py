"""Certificates for the flow: storage functions, monotonicity, passivity.

Three storage functions built from the squared field (Krasovskii style)
cover the primal block (H1: w, b), the consensus-dual block (H2: alpha,
beta) and the per-sample block (H3: theta, mu, xi). Their sum V is the
composite Lyapunov function; along trajectories V is non-increasing, H2 is
lossless with respect to its port power, and H3 dissipates except at
switching instants where terms drop out of its storage.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import active_masks, vector_field
from .errors import MissingSnapshots
from .graph import h1_gain_bound, laplacian_apply, lambda2
from .problem import coupling_terms

__all__ = [
    "storage_h1",
    "storage_h2",
    "storage_h3",
    "total_lyapunov",
    "lyapunov_decomposition",
    "consensus_residual",
    "MonotoneViolation",
    "check_monotone",
    "PassivityLedger",
    "passivity_ledger",
    "CertificateReport",
    "certificate",
    "PASSIVITY_REL_TOL",
    "H2_SWITCH_FREE_TOL",
]

# Gap tolerance is max(PASSIVITY_REL_TOL, PASSIVITY_REL_TOL * |storage change|);
# the lossless H2 identity must additionally hold to H2_SWITCH_FREE_TOL on
# switch-free trace intervals.
PASSIVITY_REL_TOL = 1e-3
H2_SWITCH_FREE_TOL = 1e-6


def _sq(arr):
    return float(np.sum(arr * arr))


def storage_h1(state, problem, derivative=None):
    """Primal storage (1/2)||w'||^2 + (1/2)||b'||^2 from the projected field."""
    d = derivative if derivative is not None else vector_field(state, problem)
    return 0.5 * (_sq(d.w) + _sq(d.b))


def storage_h2(state, problem, derivative=None):
    """Consensus-dual storage (1/2)||alpha'||^2 + (1/2)||beta'||^2.

    alpha' and beta' are the Laplacian images of w and b respectively.
    """
    d = derivative if derivative is not None else vector_field(state, problem)
    return 0.5 * (_sq(d.alpha) + _sq(d.beta))


def storage_h3(state, problem, derivative=None):
    """Sample-block storage over the inactive switching sets.

    (1/2) sum over i not in sigma of theta'^2, plus the analogous mu' and
    xi' sums. On active sets the clamped drifts are 0 anyway; the sets are
    still excluded explicitly to keep the storage's definition tied to the
    switching signals.
    """
    d = derivative if derivative is not None else vector_field(state, problem)
    sigma, iota, rho = active_masks(state, problem)
    return 0.5 * (
        _sq(d.theta[~sigma]) + _sq(d.mu[~iota]) + _sq(d.xi[~rho])
    )


def total_lyapunov(state, problem, derivative=None):
    """Composite Lyapunov value: sum of the three storages."""
    d = derivative if derivative is not None else vector_field(state, problem)
    return (
        storage_h1(state, problem, d)
        + storage_h2(state, problem, d)
        + storage_h3(state, problem, d)
    )


def lyapunov_decomposition(state, problem, derivative=None):
    """(V, V_H1, V_H2, V_H3) sharing a single field evaluation."""
    d = derivative if derivative is not None else vector_field(state, problem)
    v1 = storage_h1(state, problem, d)
    v2 = storage_h2(state, problem, d)
    v3 = storage_h3(state, problem, d)
    return v1 + v2 + v3, v1, v2, v3


def consensus_residual(state, problem):
    """Largest agreement violation: max(||L w||_inf, ||L b||_inf)."""
    lw = laplacian_apply(problem.graph, state.w)
    lb = laplacian_apply(problem.graph, state.b)
    return max(
        float(np.max(np.abs(lw), initial=0.0)),
        float(np.max(np.abs(lb), initial=0.0)),
    )


class MonotoneViolation(NamedTuple):
    t: float
    delta_v: float
    allowance: float


def check_monotone(trace, step_size=None, allowance_constant=10.0):
    """Flag recorded pairs where V increased beyond the numerical allowance.

    The allowance between consecutive rows spaced delta_t apart is
    allowance_constant * step_size * delta_t: switching instants can leave
    step-size-scale kinks in the discretized V, which this absorbs.

    Returns the (possibly empty) list of violations.
    """
    h = trace.step_size if step_size is None else step_size
    violations = []
    for k in range(len(trace.t) - 1):
        delta_t = float(trace.t[k + 1] - trace.t[k])
        delta_v = float(trace.v[k + 1] - trace.v[k])
        allowance = allowance_constant * h * delta_t
        if delta_v > allowance:
            violations.append(MonotoneViolation(float(trace.t[k + 1]), delta_v, allowance))
    return violations


@dataclass(frozen=True)
class PassivityLedger:
    """Storage-vs-port-power bookkeeping over a snapshot trace.

    Each gap is (storage change) - (integrated port power); a gap at or
    below tolerance certifies the subsystem's passivity inequality
    numerically. H2's ledger uses the exact output rates (its output rate
    equals its input value), making the lossless identity hold to round-off
    interval by interval; the other rates come from finite differences of
    consecutive snapshots. H1 additionally reports its dissipation surplus
    -||w'||^2 - w'L w' - b'L b' integrated the same way; its gap checks the
    full storage-rate identity and is informational.
    """

    intervals: int
    gap_h1: float
    gap_h2: float
    gap_h3: float
    delta_storage_h1: float
    delta_storage_h2: float
    delta_storage_h3: float
    port_integral_h1: float
    port_integral_h2: float
    port_integral_h3: float
    osp_surplus_h1: float
    h2_gap_switch_free: float
    switch_free_intervals: int

    def gap_tolerance(self, delta_storage):
        return max(PASSIVITY_REL_TOL, PASSIVITY_REL_TOL * abs(delta_storage))

    def within_tolerance(self):
        """True when the H2 and H3 certificates hold (H1 is informational)."""
        return (
            abs(self.gap_h2) <= self.gap_tolerance(self.delta_storage_h2)
            and self.gap_h3 <= self.gap_tolerance(self.delta_storage_h3)
            and self.h2_gap_switch_free <= H2_SWITCH_FREE_TOL
        )

    def as_dict(self):
        return {
            "intervals": self.intervals,
            "gap_h1": self.gap_h1,
            "gap_h2": self.gap_h2,
            "gap_h3": self.gap_h3,
            "delta_storage_h1": self.delta_storage_h1,
            "delta_storage_h2": self.delta_storage_h2,
            "delta_storage_h3": self.delta_storage_h3,
            "port_integral_h1": self.port_integral_h1,
            "port_integral_h2": self.port_integral_h2,
            "port_integral_h3": self.port_integral_h3,
            "osp_surplus_h1": self.osp_surplus_h1,
            "h2_gap_switch_free": self.h2_gap_switch_free,
            "switch_free_intervals": self.switch_free_intervals,
        }


def passivity_ledger(trace, problem):
    """Evaluate the passivity ledgers on a trace recorded with snapshots.

    Port pairing per subsystem (rates of): H2 input (Lw, Lb) against output
    (alpha, beta); H3 input (w, b) against output (zeta, eta); H1 input
    -(L alpha, L beta, zeta, eta) against output (w, b) stacked twice, taken
    as the four inner products directly.

    Raises
    ------
    MissingSnapshots
        If the trace was recorded without state snapshots.
    """
    if not trace.snapshots:
        raise MissingSnapshots("passivity ledger needs a trace recorded with snapshots")
    snaps = trace.snapshots
    times = np.asarray(trace.t, dtype=float)
    if len(snaps) != len(times):
        raise MissingSnapshots(
            f"trace has {len(times)} rows but {len(snaps)} snapshots"
        )

    derivs = [vector_field(s, problem) for s in snaps]
    masks = [np.concatenate(active_masks(s, problem)) for s in snaps]
    v1 = [storage_h1(s, problem, d) for s, d in zip(snaps, derivs)]
    v3 = [storage_h3(s, problem, d) for s, d in zip(snaps, derivs)]

    # Port signal samples. u2 doubles as H2's exact output rate.
    u2 = [np.concatenate([d.alpha.ravel(), d.beta]) for d in derivs]
    couplings = [coupling_terms(s, problem) for s in snaps]
    y3 = [np.concatenate([z.ravel(), e]) for z, e in couplings]
    u3 = [np.concatenate([s.w.ravel(), s.b]) for s in snaps]
    lalpha = [laplacian_apply(problem.graph, s.alpha).ravel() for s in snaps]
    lbeta = [laplacian_apply(problem.graph, s.beta) for s in snaps]

    n_int = len(snaps) - 1
    port2 = port3 = port1 = surplus1 = 0.0
    h2_switch_free = 0.0
    switch_free = 0
    for k in range(n_int):
        dt = float(times[k + 1] - times[k])
        # H2: trapezoid in the exact output rate times the finite-difference
        # input rate telescopes to the exact storage change (polarization).
        p2 = 0.5 * float(np.dot(u2[k] + u2[k + 1], u2[k + 1] - u2[k]))
        port2 += p2
        gap2_k = (0.5 * float(np.dot(u2[k + 1], u2[k + 1]))
                  - 0.5 * float(np.dot(u2[k], u2[k]))) - p2
        if np.array_equal(masks[k], masks[k + 1]):
            switch_free += 1
            h2_switch_free = max(h2_switch_free, abs(gap2_k))

        port3 += float(np.dot(y3[k + 1] - y3[k], u3[k + 1] - u3[k])) / dt

        dw = (snaps[k + 1].w - snaps[k].w).ravel()
        db = snaps[k + 1].b - snaps[k].b
        dla = lalpha[k + 1] - lalpha[k]
        dlb = lbeta[k + 1] - lbeta[k]
        dzeta = (couplings[k + 1][0] - couplings[k][0]).ravel()
        deta = couplings[k + 1][1] - couplings[k][1]
        port1 += -(
            float(np.dot(dw, dla)) + float(np.dot(dw, dzeta))
            + float(np.dot(db, dlb)) + float(np.dot(db, deta))
        ) / dt
        dlw = (derivs[k + 1].alpha - derivs[k].alpha).ravel()
        dlb_of_b = derivs[k + 1].beta - derivs[k].beta
        surplus1 += -(
            float(np.dot(dw, dw)) + float(np.dot(dw, dlw)) + float(np.dot(db, dlb_of_b))
        ) / dt

    delta2 = (0.5 * float(np.dot(u2[-1], u2[-1])) - 0.5 * float(np.dot(u2[0], u2[0]))) \
        if u2 else 0.0
    return PassivityLedger(
        intervals=n_int,
        gap_h1=(v1[-1] - v1[0]) - (port1 + surplus1),
        gap_h2=delta2 - port2,
        gap_h3=(v3[-1] - v3[0]) - port3,
        delta_storage_h1=v1[-1] - v1[0],
        delta_storage_h2=delta2,
        delta_storage_h3=v3[-1] - v3[0],
        port_integral_h1=port1,
        port_integral_h2=port2,
        port_integral_h3=port3,
        osp_surplus_h1=surplus1,
        h2_gap_switch_free=h2_switch_free,
        switch_free_intervals=switch_free,
    )


@dataclass(frozen=True)
class CertificateReport:
    """Bundled certificates for one run: V decomposition at the final row,
    Lyapunov violations, passivity ledger and the graph gain bound."""

    v: float
    v_h1: float
    v_h2: float
    v_h3: float
    lyapunov_violations: tuple
    ledger: PassivityLedger
    consensus_residual: float
    lambda2: float
    gain_bound_h1: float
    allowance_constant: float

    @property
    def passed(self):
        ok = not self.lyapunov_violations
        if self.ledger is not None:
            ok = ok and self.ledger.within_tolerance()
        return ok

    def as_dict(self):
        return {
            "V": self.v,
            "V_H1": self.v_h1,
            "V_H2": self.v_h2,
            "V_H3": self.v_h3,
            "lyapunov_violations": [
                {"t": t, "delta_V": dv, "allowance": a}
                for t, dv, a in self.lyapunov_violations
            ],
            "passivity": self.ledger.as_dict() if self.ledger is not None else None,
            "consensus_residual": self.consensus_residual,
            "lambda2": _json_float(self.lambda2),
            "gain_bound_h1": _json_float(self.gain_bound_h1),
            "allowance_constant": self.allowance_constant,
            "passed": self.passed,
        }


def _json_float(value):
    return value if math.isfinite(value) else None


def certificate(trace, problem, allowance_constant=10.0, include_ledger=True):
    """Evaluate every certificate for a recorded run."""
    violations = tuple(check_monotone(trace, allowance_constant=allowance_constant))
    ledger = passivity_ledger(trace, problem) if include_ledger else None
    return CertificateReport(
        v=float(trace.v[-1]),
        v_h1=float(trace.v_h1[-1]),
        v_h2=float(trace.v_h2[-1]),
        v_h3=float(trace.v_h3[-1]),
        lyapunov_violations=violations,
        ledger=ledger,
        consensus_residual=float(trace.consensus_residual[-1]),
        lambda2=lambda2(problem.graph),
        gain_bound_h1=h1_gain_bound(problem.graph),
        allowance_constant=allowance_constant,
    )
