"""Fixed-step time discretization of the projected flow, with trace capture.

Discretize-then-project: after each step the projected variables (xi, theta,
mu) are clamped to max(0, value), which reproduces the continuous projection
semantics as the step size goes to 0 and keeps every recorded state exactly
feasible. Boundary detection elsewhere can therefore test for exact zeros.
"""

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .diagnostics import lyapunov_decomposition
from .dynamics import field_inf_norm, raw_drifts, vector_field
from .errors import InvalidParam, NonFiniteState, ParseError
from .problem import (
    NetworkState,
    kkt_residuals,
    objective_value,
    random_state,
    zeros_state,
)

__all__ = [
    "StopReason",
    "FlowConfig",
    "Trace",
    "step",
    "run_flow",
    "write_trace_csv",
    "read_trace_csv",
    "write_snapshots",
    "read_snapshots",
]

TRACE_FORMAT = "dsvmflow trace v1"
TRACE_COLUMNS = (
    "t", "V", "V_H1", "V_H2", "V_H3",
    "consensus_residual", "kkt_max_residual", "objective",
)


class StopReason(enum.Enum):
    CONVERGED = "converged"
    MAX_STEPS = "max_steps"


@dataclass
class FlowConfig:
    """Integration settings.

    init is either 'zeros' (the default: a feasible point of every
    nonnegativity constraint) or 'random' (seeded Gaussian draws of size
    `init_scale`, with projected variables taking absolute values).
    """

    step_size: float = 1e-3
    max_steps: int = 2_000_000
    stop_tol: float = 1e-6
    record_every: int = 100
    method: str = "euler"
    init: str = "zeros"
    init_scale: float = 1.0
    init_seed: int = 0
    snapshots: bool = False

    def validate(self):
        if not self.step_size > 0:
            raise InvalidParam(f"step_size must be > 0, got {self.step_size}")
        if not self.stop_tol > 0:
            raise InvalidParam(f"stop_tol must be > 0, got {self.stop_tol}")
        if self.max_steps < 1:
            raise InvalidParam(f"max_steps must be >= 1, got {self.max_steps}")
        if self.record_every < 1:
            raise InvalidParam(f"record_every must be >= 1, got {self.record_every}")
        if self.method not in ("euler", "rk4"):
            raise InvalidParam(f"method must be 'euler' or 'rk4', got {self.method!r}")
        if self.init not in ("zeros", "random"):
            raise InvalidParam(f"init must be 'zeros' or 'random', got {self.init!r}")
        return self


@dataclass
class Trace:
    """Time-indexed diagnostics record of a run.

    Rows are written every `record_every` steps plus once at the final
    state; `t` is strictly increasing. `snapshots`, when present, holds one
    full state copy per row.
    """

    step_size: float
    t: np.ndarray
    v: np.ndarray
    v_h1: np.ndarray
    v_h2: np.ndarray
    v_h3: np.ndarray
    consensus_residual: np.ndarray
    kkt_max_residual: np.ndarray
    objective: np.ndarray
    snapshots: list = field(default=None, repr=False)

    def __len__(self):
        return len(self.t)

    def rows(self):
        return zip(
            self.t, self.v, self.v_h1, self.v_h2, self.v_h3,
            self.consensus_residual, self.kkt_max_residual, self.objective,
        )


def _clamped(values):
    return np.maximum(values, 0.0)


def _euler_update(state, derivative, h):
    return NetworkState(
        w=state.w + h * derivative.w,
        b=state.b + h * derivative.b,
        xi=_clamped(state.xi + h * derivative.xi),
        theta=_clamped(state.theta + h * derivative.theta),
        mu=_clamped(state.mu + h * derivative.mu),
        alpha=state.alpha + h * derivative.alpha,
        beta=state.beta + h * derivative.beta,
    )


def _blend(state, stages, weights, h):
    new = {}
    for name in ("w", "b", "xi", "theta", "mu", "alpha", "beta"):
        acc = getattr(state, name).astype(float, copy=True)
        for stage, weight in zip(stages, weights):
            acc = acc + (h * weight) * getattr(stage, name)
        if name in ("xi", "theta", "mu"):
            acc = _clamped(acc)
        new[name] = acc
    return NetworkState(**new)


def _rk4_update(state, problem, h):
    # Stages use the raw (unprojected-drift) field; each stage state and the
    # final combination are clamped back into the orthant.
    k1 = raw_drifts(state, problem)
    k2 = raw_drifts(_blend(state, [k1], [0.5], h), problem)
    k3 = raw_drifts(_blend(state, [k2], [0.5], h), problem)
    k4 = raw_drifts(_blend(state, [k3], [1.0], h), problem)
    return _blend(
        state, [k1, k2, k3, k4],
        [1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0], h,
    )


def _check_finite(state, step_index=None):
    for arr in state.arrays():
        if not np.all(np.isfinite(arr)):
            raise NonFiniteState(
                "state left the finite range; reduce the step size",
                step=step_index,
            )


def step(state, problem, cfg, derivative=None):
    """Advance one step of length cfg.step_size.

    Euler takes the projected field (reused from `derivative` when given)
    and clamps the projected variables afterwards; rk4 combines four raw
    stage evaluations with per-stage clamping.

    Raises
    ------
    NonFiniteState
        If any entry of the new state is NaN or infinite.
    """
    if cfg.method == "euler":
        if derivative is None:
            derivative = vector_field(state, problem)
        new = _euler_update(state, derivative, cfg.step_size)
    else:
        new = _rk4_update(state, problem, cfg.step_size)
    _check_finite(new)
    return new


class _Recorder:
    def __init__(self, problem, cfg):
        self.problem = problem
        self.cfg = cfg
        self.columns = {name: [] for name in TRACE_COLUMNS}
        self.snapshots = [] if cfg.snapshots else None

    def record(self, t, state, derivative):
        v, v1, v2, v3 = lyapunov_decomposition(state, self.problem, derivative)
        consensus = max(
            float(np.max(np.abs(derivative.alpha), initial=0.0)),
            float(np.max(np.abs(derivative.beta), initial=0.0)),
        )
        kkt = kkt_residuals(state, self.problem, derivative=derivative).max_residual()
        cols = self.columns
        cols["t"].append(t)
        cols["V"].append(v)
        cols["V_H1"].append(v1)
        cols["V_H2"].append(v2)
        cols["V_H3"].append(v3)
        cols["consensus_residual"].append(consensus)
        cols["kkt_max_residual"].append(kkt)
        cols["objective"].append(objective_value(state, self.problem))
        if self.snapshots is not None:
            self.snapshots.append(state.copy())

    def finish(self):
        cols = self.columns
        return Trace(
            step_size=self.cfg.step_size,
            t=np.array(cols["t"]),
            v=np.array(cols["V"]),
            v_h1=np.array(cols["V_H1"]),
            v_h2=np.array(cols["V_H2"]),
            v_h3=np.array(cols["V_H3"]),
            consensus_residual=np.array(cols["consensus_residual"]),
            kkt_max_residual=np.array(cols["kkt_max_residual"]),
            objective=np.array(cols["objective"]),
            snapshots=self.snapshots,
        )


def initial_state(problem, cfg):
    if cfg.init == "zeros":
        return zeros_state(problem)
    return random_state(problem, cfg.init_scale, cfg.init_seed)


def run_flow(problem, cfg):
    """Integrate from the configured initial state until the field vanishes.

    Returns
    -------
    (NetworkState, Trace, StopReason)
        Final state, the recorded trace, and CONVERGED when the projected
        field's inf-norm reached cfg.stop_tol within cfg.max_steps steps
        (MAX_STEPS otherwise).

    Raises
    ------
    NonFiniteState
        With the offending step index, when the iteration blows up.
    """
    cfg.validate()
    h = cfg.step_size
    state = initial_state(problem, cfg)
    recorder = _Recorder(problem, cfg)
    reason = StopReason.MAX_STEPS
    use_kernel = cfg.method == "euler" and _kernel.ENABLED
    k = 0
    last_recorded = -1
    while True:
        derivative = vector_field(state, problem)
        norm = field_inf_norm(derivative)
        if not np.isfinite(norm):
            raise NonFiniteState(
                f"field is not finite at step {k}; reduce the step size", step=k
            )
        if k % cfg.record_every == 0:
            recorder.record(k * h, state, derivative)
            last_recorded = k
        if norm <= cfg.stop_tol:
            reason = StopReason.CONVERGED
            break
        if k >= cfg.max_steps:
            break
        if use_kernel:
            # Advance in place until the next record boundary (or the step
            # budget); the kernel replicates the projected field and clamped
            # update of the numpy path, checked in the test suite.
            budget = min(
                cfg.record_every - (k % cfg.record_every),
                cfg.max_steps - k,
            )
            taken, status = _kernel.euler_chunk(
                state.w, state.b, state.xi, state.theta, state.mu,
                state.alpha, state.beta,
                problem.features, problem.label_features, problem.labels,
                problem.node_offsets,
                problem.graph._adjacency, problem.graph._offsets,
                problem.penalty, h, budget, cfg.stop_tol,
            )
            k += taken
            if status == _kernel.NONFINITE:
                raise NonFiniteState(
                    f"field is not finite at step {k}; reduce the step size", step=k
                )
            if taken == 0:
                # Kernel and numpy convergence checks can disagree by one
                # ulp; take one explicit step to guarantee progress.
                state = _euler_update(state, derivative, h)
                k += 1
        elif cfg.method == "euler":
            state = _euler_update(state, derivative, h)
            k += 1
        else:
            state = _rk4_update(state, problem, h)
            k += 1
    if last_recorded != k:
        recorder.record(k * h, state, derivative)
    _check_finite(state, step_index=k)
    return state, recorder.finish(), reason


def _fmt(value):
    return repr(float(value))


def write_trace_csv(trace, path):
    """Persist trace rows as CSV under a versioned header comment."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# {TRACE_FORMAT} step_size={_fmt(trace.step_size)}\n")
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in trace.rows():
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_trace_csv(path):
    """Load a trace written by `write_trace_csv` (snapshots are separate)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith(f"# {TRACE_FORMAT}"):
        raise ParseError(f"{path}: not a {TRACE_FORMAT} file")
    try:
        step_size = float(lines[0].split("step_size=")[1])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"{path}: malformed trace header") from exc
    if len(lines) < 2 or lines[1] != ",".join(TRACE_COLUMNS):
        raise ParseError(f"{path}: unexpected column header")
    data = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(TRACE_COLUMNS):
            raise ParseError(f"{path}: line {lineno}: expected {len(TRACE_COLUMNS)} columns")
        try:
            data.append([float(p) for p in parts])
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if not data:
        raise ParseError(f"{path}: no trace rows")
    cols = np.array(data).T
    return Trace(
        step_size=step_size,
        t=cols[0], v=cols[1], v_h1=cols[2], v_h2=cols[3], v_h3=cols[4],
        consensus_residual=cols[5], kkt_max_residual=cols[6], objective=cols[7],
    )


def _state_to_lists(state):
    return {
        "w": state.w.tolist(), "b": state.b.tolist(), "xi": state.xi.tolist(),
        "theta": state.theta.tolist(), "mu": state.mu.tolist(),
        "alpha": state.alpha.tolist(), "beta": state.beta.tolist(),
    }


def _state_from_lists(payload):
    return NetworkState(
        w=np.array(payload["w"], dtype=float),
        b=np.array(payload["b"], dtype=float),
        xi=np.array(payload["xi"], dtype=float),
        theta=np.array(payload["theta"], dtype=float),
        mu=np.array(payload["mu"], dtype=float),
        alpha=np.array(payload["alpha"], dtype=float),
        beta=np.array(payload["beta"], dtype=float),
    )


def write_snapshots(trace, path):
    """Persist full-state snapshots (one per trace row) as JSON."""
    payload = {
        "format": TRACE_FORMAT,
        "t": [float(t) for t in trace.t],
        "states": [_state_to_lists(s) for s in trace.snapshots],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def read_snapshots(path):
    """Load snapshots written by `write_snapshots` as a list of states."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != TRACE_FORMAT:
        raise ParseError(f"{path}: not a {TRACE_FORMAT} snapshot file")
    return [_state_from_lists(p) for p in payload["states"]]
