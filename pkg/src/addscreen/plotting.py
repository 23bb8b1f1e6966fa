"""Figures for benchmark tables and fitted components (matplotlib, Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import LEVELS, STRUCT_KEYS, BenchmarkTable  # noqa: E402

_CLASS_COLORS = {"nonlinear": "tab:red", "linear": "tab:blue", "zero": "0.6"}


def plot_benchmark(table: BenchmarkTable, path: str) -> str:
    """Minimum-model-size quantiles and S per method, one panel per scenario."""
    scen = []
    for r in table.rows:
        if r.scenario not in scen and r.quantiles is not None:
            scen.append(r.scenario)
    struct_rows = [r for r in table.rows if r.structure]
    panels = len(scen) + (1 if struct_rows else 0)
    if panels == 0:
        raise ValueError("table has no rows to plot")
    fig, axes = plt.subplots(1, panels, figsize=(4.5 * panels, 3.8), squeeze=False)
    for ax, s in zip(axes[0], scen):
        rows = [r for r in table.rows if r.scenario == s and r.quantiles is not None]
        for i, r in enumerate(rows):
            q = r.quantiles
            ax.vlines(i, q[0], q[4], color="0.4", lw=1)
            ax.vlines(i, q[1], q[3], color="tab:blue", lw=6)
            ax.plot(i, q[2], "o", color="white", mec="black", ms=5)
            ax.annotate(f"S={r.S:.2f}", (i, q[4]), textcoords="offset points", xytext=(0, 4), ha="center", fontsize=8)
        ax.set_xticks(range(len(rows)), [r.method for r in rows])
        ax.set_yscale("log")
        ax.set_ylabel("minimum model size")
        ax.set_title(s, fontsize=9)
    if struct_rows:
        ax = axes[0][-1]
        width = 0.8 / len(struct_rows)
        for i, r in enumerate(struct_rows):
            xs = [k + (i - (len(struct_rows) - 1) / 2) * width for k in range(len(STRUCT_KEYS))]
            ax.bar(xs, [r.structure[k] for k in STRUCT_KEYS], width,
                   yerr=[r.structure_sd[k] for k in STRUCT_KEYS], capsize=2, label=f"{r.method} ({r.scenario})")
        ax.set_xticks(range(len(STRUCT_KEYS)), list(STRUCT_KEYS))
        ax.set_ylabel("mean count (sd)")
        ax.legend(fontsize=7)
        ax.set_title("structure identification", fontsize=9)
    fig.suptitle(f"quantiles {', '.join(f'{q}%' for q in LEVELS)}", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_components(fit_json: dict, path: str, max_panels: int = 16) -> str:
    """Fitted curves of the nonzero components in a fit JSON document."""
    comps = [c for c in fit_json["components"] if c.get("curve")][:max_panels]
    if not comps:
        comps_note = "all components are zero"
        fig, ax = plt.subplots(figsize=(4, 2))
        ax.text(0.5, 0.5, comps_note, ha="center", va="center")
        ax.set_axis_off()
    else:
        cols = min(4, len(comps))
        rows = math.ceil(len(comps) / cols)
        fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.6 * rows), squeeze=False)
        for ax in axes.ravel()[len(comps):]:
            ax.set_axis_off()
        for ax, c in zip(axes.ravel(), comps):
            ax.plot(c["curve"]["x"], c["curve"]["y"], color=_CLASS_COLORS.get(c["class"], "k"))
            title = f"{c['name']} ({c['class']})"
            if c.get("slope") is not None:
                title += f", slope {c['slope']:.3g}"
            ax.set_title(title, fontsize=8)
            ax.axhline(0.0, color="0.8", lw=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
