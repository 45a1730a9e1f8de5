"""Figure rendering and human-readable reporting for recorded runs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_figures", "format_report"]


def _semilogy(ax, t, values, label):
    values = np.asarray(values, dtype=float)
    mask = values > 0
    if mask.any():
        ax.semilogy(t[mask], values[mask], label=label, linewidth=1.2)
    else:
        ax.plot(t, np.zeros_like(t), label=label + " (0)", linewidth=1.2)


def render_figures(trace, out_dir):
    """Render trajectory figures as PNG files next to the trace data.

    Returns the list of written file paths.
    """
    out_dir = str(out_dir)
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4.5))
    _semilogy(ax, trace.t, trace.v, "V")
    _semilogy(ax, trace.t, trace.v_h1, "V_H1")
    _semilogy(ax, trace.t, trace.v_h2, "V_H2")
    _semilogy(ax, trace.t, trace.v_h3, "V_H3")
    ax.set_xlabel("t")
    ax.set_ylabel("storage")
    ax.set_title("Lyapunov function and subsystem storages")
    ax.legend()
    ax.grid(True, alpha=0.3)
    path = f"{out_dir}/fig_lyapunov.png"
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    _semilogy(ax, trace.t, trace.consensus_residual, "consensus residual")
    _semilogy(ax, trace.t, trace.kkt_max_residual, "max KKT residual")
    ax.set_xlabel("t")
    ax.set_ylabel("residual")
    ax.set_title("Agreement and optimality residuals")
    ax.legend()
    ax.grid(True, alpha=0.3)
    path = f"{out_dir}/fig_residuals.png"
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(trace.t, trace.objective, linewidth=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("objective")
    ax.set_title("Network objective along the flow")
    ax.grid(True, alpha=0.3)
    path = f"{out_dir}/fig_objective.png"
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    paths.append(path)

    return paths


def format_report(summary, cert_report, figure_paths=()):
    """Merge a run summary and a certificate report into one text block."""
    lines = ["run summary", "-----------"]
    lines.append(f"stop reason          : {summary.get('stop_reason')}")
    lines.append(f"steps                : {summary.get('steps')}")
    lines.append(f"final time           : {summary.get('final_time')}")
    lines.append(f"objective            : {summary.get('objective')}")
    lines.append(f"consensus residual   : {summary.get('consensus_residual')}")
    kkt = summary.get("kkt", {})
    for name, value in kkt.items():
        lines.append(f"kkt {name:<17}: {value}")
    lines.append(f"lambda2              : {summary.get('lambda2')}")
    lines.append(f"gain bound 2*lambda2 : {summary.get('gain_bound_h1')}")
    lines.append("")
    lines.append("certificates")
    lines.append("------------")
    cert = cert_report.as_dict()
    lines.append(f"V (final)            : {cert['V']}")
    lines.append(
        f"  = V_H1 + V_H2 + V_H3 : {cert['V_H1']} + {cert['V_H2']} + {cert['V_H3']}"
    )
    violations = cert["lyapunov_violations"]
    lines.append(f"Lyapunov violations  : {len(violations)}")
    for v in violations[:10]:
        lines.append(f"  t={v['t']}: dV={v['delta_V']} > allowance={v['allowance']}")
    passivity = cert["passivity"]
    if passivity is not None:
        lines.append(f"H1 gap (identity)    : {passivity['gap_h1']}")
        lines.append(f"H1 dissipation int.  : {passivity['osp_surplus_h1']}")
        lines.append(f"H2 gap (lossless)    : {passivity['gap_h2']}")
        lines.append(f"H2 gap, switch-free  : {passivity['h2_gap_switch_free']}")
        lines.append(f"H3 gap               : {passivity['gap_h3']}")
        lines.append(
            f"switch-free intervals: {passivity['switch_free_intervals']}"
            f"/{passivity['intervals']}"
        )
    else:
        lines.append("passivity ledger     : skipped (no snapshots)")
    lines.append(f"certificates passed  : {cert['passed']}")
    if figure_paths:
        lines.append("")
        lines.append("figures")
        lines.append("-------")
        for p in figure_paths:
            lines.append(f"  {p}")
    return "\n".join(lines) + "\n"
