"""Signal-trajectory figures rendered from run traces.

A figure shows the per-step signal reading of one or more runs against
the equilibrium band of the configuration that produced them.  Output is
a self-contained SVG plus a sibling CSV carrying the raw series, so the
numbers behind every figure stay greppable.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import RunTrace

# Fixed hash salt so element ids inside the SVG do not change between
# renders of identical input.
_SVG_SALT = "maskflow"


def emit_trajectory_plot(traces: list[RunTrace], out_path) -> tuple[Path, Path]:
    """Render signal-vs-step curves for the given traces.

    All traces must share one signal kind.  Returns the figure path and
    the path of the CSV written next to it (same stem, .csv suffix).
    """
    if not traces:
        raise ValueError("no traces given; nothing to plot")
    kinds = {t.header.get("signal") for t in traces}
    if len(kinds) > 1:
        raise ValueError(f"traces mix signal kinds {sorted(kinds)}; plot one kind at a time")
    kind = kinds.pop()

    out_path = Path(out_path)
    if out_path.suffix.lower() != ".svg":
        out_path = out_path.with_suffix(".svg")
    csv_path = out_path.with_suffix(".csv")

    with matplotlib.rc_context({"svg.hashsalt": _SVG_SALT}):
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        first = traces[0].header
        ax.axhspan(first["rho_low"], first["rho_high"], color="0.85", zorder=0,
                   label=f"band [{first['rho_low']}, {first['rho_high']}]")
        for i, trace in enumerate(traces):
            steps = [r.step for r in trace.records]
            values = [r.signal_value for r in trace.records]
            h = trace.header
            label = f"{h.get('strategy', '?')} l_init={h.get('l_init', '?')}"
            if len(traces) > 1:
                label = f"[{i}] {label}"
            ax.plot(steps, values, marker="o", markersize=2.5, linewidth=1.0, label=label)
        ax.set_xlabel("step")
        ax.set_ylabel(f"{kind} signal")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)

    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trace", "step", "signal_kind", "signal_value"])
        for i, trace in enumerate(traces):
            for r in trace.records:
                writer.writerow([i, r.step, r.signal_kind.value, r.signal_value])
    return out_path, csv_path
