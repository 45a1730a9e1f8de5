"""Command-line front end.

Subcommands: gen-data, run, check, oracle, report. A run is described by a
single JSON config (reproducible as a committed file); individual fields can
be overridden by flags. Exit codes: 0 success, 1 domain failure
(non-convergence, failed certificates), 2 usage or config errors.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import integrator as integ
from .diagnostics import certificate
from .errors import (
    ConfigError,
    DimMismatch,
    DisconnectedGraph,
    DsvmError,
    InvalidEdge,
    InvalidParam,
    LabelError,
    MissingSnapshots,
    ParseError,
    TooFewSamples,
)
from .graph import build_graph, lambda2, topology_edges
from .oracle import solve_centralized
from .problem import build_problem, kkt_residuals, objective_value

_USAGE_ERRORS = (
    ConfigError, InvalidParam, ParseError, LabelError, DimMismatch,
    InvalidEdge, DisconnectedGraph, TooFewSamples, MissingSnapshots,
)


def _dump_json(payload, path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def _require(mapping, key, kind, where):
    if key not in mapping:
        raise ConfigError(f"{where}: missing field {key!r}")
    value = mapping[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"{where}: field {key!r} must be {kind.__name__}")
    return value


def _graph_from_config(section):
    if not isinstance(section, dict):
        raise ConfigError("graph: must be an object")
    nodes = _require(section, "nodes", int, "graph")
    if "edges" in section:
        edges = section["edges"]
        if not isinstance(edges, list):
            raise ConfigError("graph.edges: must be a list of [a, b] pairs")
        return build_graph(nodes, [tuple(e) for e in edges])
    if "topology" in section:
        return build_graph(nodes, topology_edges(section["topology"], nodes))
    raise ConfigError("graph: needs either 'edges' or 'topology'")


def _dataset_from_config(section, base_dir):
    if not isinstance(section, dict):
        raise ConfigError("dataset: must be an object")
    if "path" in section:
        path = Path(base_dir) / section["path"]
        return data_mod.load_dataset(path, header=bool(section.get("header", False)))
    if "synthetic" in section:
        syn = section["synthetic"]
        return data_mod.gen_synthetic(
            _require(syn, "n_per_class", int, "dataset.synthetic"),
            _require(syn, "dim", int, "dataset.synthetic"),
            _require(syn, "separation", float, "dataset.synthetic"),
            _require(syn, "seed", int, "dataset.synthetic"),
        )
    raise ConfigError("dataset: needs either 'path' or 'synthetic'")


def _flow_config(section, snapshots):
    section = section or {}
    if not isinstance(section, dict):
        raise ConfigError("flow: must be an object")
    known = {
        "step_size", "max_steps", "stop_tol", "record_every",
        "method", "init", "init_scale", "init_seed",
    }
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"flow: unknown fields {sorted(unknown)}")
    cfg = integ.FlowConfig(snapshots=snapshots, **section)
    try:
        cfg.validate()
    except (InvalidParam, TypeError) as exc:
        raise ConfigError(f"flow: {exc}") from exc
    return cfg


def _problem_from_config(config, base_dir):
    dataset = _dataset_from_config(_require(config, "dataset", dict, "config"), base_dir)
    graph = _graph_from_config(_require(config, "graph", dict, "config"))
    strategy = config.get("partition", "contiguous")
    if strategy not in ("contiguous", "round_robin"):
        raise ConfigError(f"partition: unknown strategy {strategy!r}")
    c_value = _require(config, "C", float, "config")
    if not c_value > 0:
        raise ConfigError(f"C: must be > 0, got {c_value}")
    part = data_mod.partition(dataset, graph.node_count, strategy)
    return build_problem(part, graph, c_value), dataset


def cmd_gen_data(args):
    dataset = data_mod.gen_synthetic(args.n, args.dim, args.sep, args.seed)
    out = Path(args.out)
    data_mod.write_dataset_csv(dataset, out)
    sidecar = out.with_suffix(".json")
    _dump_json(
        {"n_per_class": args.n, "dim": args.dim, "separation": args.sep, "seed": args.seed},
        sidecar,
    )
    print(f"wrote {out} ({2 * args.n} samples) and {sidecar}")
    return 0


def cmd_run(args):
    config = _load_json(args.config)
    if not isinstance(config, dict):
        raise ConfigError(f"{args.config}: config must be a JSON object")
    if "flow" in config and not isinstance(config["flow"], dict):
        raise ConfigError("flow: must be an object")
    base_dir = Path(args.config).parent

    if args.max_steps is not None:
        config.setdefault("flow", {})["max_steps"] = args.max_steps
    if args.step_size is not None:
        config.setdefault("flow", {})["step_size"] = args.step_size
    if args.stop_tol is not None:
        config.setdefault("flow", {})["stop_tol"] = args.stop_tol
    if args.record_every is not None:
        config.setdefault("flow", {})["record_every"] = args.record_every
    if args.method is not None:
        config.setdefault("flow", {})["method"] = args.method
    if args.snapshots is not None:
        config["snapshots"] = args.snapshots
    if args.out is not None:
        config["output_dir"] = args.out

    snapshots = bool(config.get("snapshots", False))
    cfg = _flow_config(config.get("flow"), snapshots)
    problem, dataset = _problem_from_config(config, base_dir)

    out_dir = Path(config.get("output_dir", "dsvmflow-out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    state, trace, reason = integ.run_flow(problem, cfg)
    wall = time.perf_counter() - start

    data_mod.write_dataset_csv(dataset, out_dir / "data.csv")
    resolved = {
        "dataset": {"path": "data.csv", "header": False},
        "dataset_source": config.get("dataset"),
        "graph": config.get("graph"),
        "partition": config.get("partition", "contiguous"),
        "C": config.get("C"),
        "flow": {
            "step_size": cfg.step_size, "max_steps": cfg.max_steps,
            "stop_tol": cfg.stop_tol, "record_every": cfg.record_every,
            "method": cfg.method, "init": cfg.init,
            "init_scale": cfg.init_scale, "init_seed": cfg.init_seed,
        },
        "snapshots": snapshots,
    }
    _dump_json(resolved, out_dir / "config.json")
    integ.write_trace_csv(trace, out_dir / "trace.csv")
    if snapshots:
        integ.write_snapshots(trace, out_dir / "snapshots.json")
    with open(out_dir / "final_state.json", "w") as fh:
        json.dump(integ._state_to_lists(state), fh, indent=2, sort_keys=True)
        fh.write("\n")

    report = kkt_residuals(state, problem)
    lam2 = lambda2(problem.graph)
    summary = {
        "stop_reason": reason.value,
        "converged": reason is integ.StopReason.CONVERGED,
        "steps": int(round(trace.t[-1] / cfg.step_size)),
        "final_time": float(trace.t[-1]),
        "objective": objective_value(state, problem),
        "consensus_residual": float(trace.consensus_residual[-1]),
        "kkt": report.as_dict(),
        "lambda2": lam2 if np.isfinite(lam2) else None,
        "gain_bound_h1": 2.0 * lam2 if np.isfinite(lam2) else None,
        "wall_time_s": wall,
    }
    _dump_json(summary, out_dir / "summary.json")
    print(f"{reason.value}: t={summary['final_time']}, "
          f"objective={summary['objective']}, outputs in {out_dir}")
    return 0 if reason is integ.StopReason.CONVERGED else 1


def _load_run_dir(trace_dir):
    trace_dir = Path(trace_dir)
    config = _load_json(trace_dir / "config.json")
    problem, _ = _problem_from_config(config, trace_dir)
    trace = integ.read_trace_csv(trace_dir / "trace.csv")
    snap_path = trace_dir / "snapshots.json"
    if snap_path.exists():
        trace.snapshots = integ.read_snapshots(snap_path)
    return trace_dir, config, problem, trace


def cmd_check(args):
    trace_dir, _, problem, trace = _load_run_dir(args.trace_dir)
    if not args.skip_ledger and trace.snapshots is None:
        raise MissingSnapshots(
            f"{trace_dir}: run was recorded without snapshots; "
            "re-run with snapshots or pass --skip-ledger"
        )
    cert = certificate(
        trace, problem,
        allowance_constant=args.allowance_c,
        include_ledger=not args.skip_ledger,
    )
    _dump_json(cert.as_dict(), trace_dir / "certificate.json")
    violations = len(cert.lyapunov_violations)
    print(f"Lyapunov violations: {violations}")
    if cert.ledger is not None:
        print(f"H2 gap: {cert.ledger.gap_h2} (switch-free max {cert.ledger.h2_gap_switch_free})")
        print(f"H3 gap: {cert.ledger.gap_h3}")
    print(f"certificates {'PASSED' if cert.passed else 'FAILED'}; "
          f"wrote {trace_dir / 'certificate.json'}")
    return 0 if cert.passed else 1


def cmd_oracle(args):
    dataset = data_mod.load_dataset(args.data, header=args.header)
    sol = solve_centralized(dataset, args.c, args.m)
    payload = {
        "w": sol.w.tolist(),
        "b": sol.b,
        "xi": sol.xi.tolist(),
        "theta": sol.theta.tolist(),
        "mu": sol.mu.tolist(),
        "objective": sol.objective,
        "kkt_residual": sol.kkt_residual,
        "degenerate_b": sol.degenerate_b,
        "penalty_scale": args.m * args.c,
    }
    if args.out:
        _dump_json(payload, args.out)
        print(f"wrote {args.out}")
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_report(args):
    from .report import format_report, render_figures  # defers matplotlib import

    trace_dir, _, problem, trace = _load_run_dir(args.trace_dir)
    summary = _load_json(trace_dir / "summary.json")
    cert = certificate(
        trace, problem,
        allowance_constant=args.allowance_c,
        include_ledger=trace.snapshots is not None,
    )
    figures = render_figures(trace, trace_dir)
    text = format_report(summary, cert, figures)
    with open(trace_dir / "report.txt", "w") as fh:
        fh.write(text)
    print(text, end="")
    return 0 if cert.passed else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dsvmflow",
        description="Simulate and certify the networked soft-margin training flow.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic two-blob dataset CSV")
    p.add_argument("--n", type=int, required=True, help="samples per class")
    p.add_argument("--dim", type=int, required=True, help="feature dimension")
    p.add_argument("--sep", type=float, required=True, help="distance between blob centers")
    p.add_argument("--seed", type=int, required=True, help="generator seed")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("run", help="integrate the flow described by a JSON config")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--out", help="override output directory")
    p.add_argument("--max-steps", type=int, help="override flow.max_steps")
    p.add_argument("--step-size", type=float, help="override flow.step_size")
    p.add_argument("--stop-tol", type=float, help="override flow.stop_tol")
    p.add_argument("--record-every", type=int, help="override flow.record_every")
    p.add_argument("--method", choices=["euler", "rk4"], help="override flow.method")
    snaps = p.add_mutually_exclusive_group()
    snaps.add_argument("--snapshots", dest="snapshots", action="store_true", default=None)
    snaps.add_argument("--no-snapshots", dest="snapshots", action="store_false", default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("check", help="evaluate certificates for a recorded run")
    p.add_argument("--trace-dir", required=True, help="directory written by `run`")
    p.add_argument("--allowance-c", type=float, default=10.0,
                   help="Lyapunov allowance constant (default 10)")
    p.add_argument("--skip-ledger", action="store_true",
                   help="skip the passivity ledger (no snapshots needed)")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("oracle", help="solve the reference problem for a dataset CSV")
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--c", type=float, required=True, help="trade-off constant C")
    p.add_argument("--m", type=int, required=True, help="node count (penalty scale m*C)")
    p.add_argument("--header", action="store_true", help="skip one CSV header line")
    p.add_argument("--out", help="write the solution JSON here instead of stdout")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("report", help="render figures and a text report for a run")
    p.add_argument("--trace-dir", required=True, help="directory written by `run`")
    p.add_argument("--allowance-c", type=float, default=10.0)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DsvmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
