"""Figure rendering for benchmark reports.

Each renderer takes the rows a benchmark produced and writes one PNG
next to the delimited output. Plotting is presentation only: nothing
here feeds back into results.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .bench import BenchResult
from .graph import PHASES


def _size_label(size: int) -> str:
    for unit, div in (("G", 1 << 30), ("M", 1 << 20), ("K", 1 << 10)):
        if size >= div and size % div == 0:
            return f"{size // div}{unit}"
    return str(size)


def render_bandwidth(result: BenchResult, out_path: str, title: str) -> str:
    rows = [r for r in result.rows if r.metric == "bandwidth"]
    sizes = [r.size for r in rows]
    fig, (ax_bw, ax_sp) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax_bw.plot(sizes, [r.value / 1e9 for r in rows], marker="o")
    ax_bw.set_xscale("log", base=2)
    ax_bw.set_xticks(sizes, [_size_label(s) for s in sizes])
    ax_bw.set_xlabel("message size")
    ax_bw.set_ylabel("bandwidth [GB/s]")
    ax_bw.set_title(title)
    ax_sp.plot(sizes, [r.speedup for r in rows], marker="s", color="tab:green")
    ax_sp.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
    ax_sp.set_xscale("log", base=2)
    ax_sp.set_xticks(sizes, [_size_label(s) for s in sizes])
    ax_sp.set_xlabel("message size")
    ax_sp.set_ylabel("speedup vs single path")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def render_phase_breakdown(result: BenchResult, out_path: str, title: str) -> str:
    """Stacked per-phase fractions, first and subsequent iterations."""
    keys = sorted({r.size for r in result.rows})
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4), sharey=True)
    for ax, stage in zip(axes, ("first", "steady")):
        bottoms = [0.0] * len(keys)
        for phase in PHASES:
            heights = []
            for k in keys:
                match = [r.value for r in result.rows
                         if r.size == k and r.metric == f"fraction_{phase}_{stage}"]
                heights.append(match[0] if match else 0.0)
            ax.bar(range(len(keys)), heights, bottom=bottoms, label=phase)
            bottoms = [b + h for b, h in zip(bottoms, heights)]
        ax.set_xticks(range(len(keys)), [str(k) for k in keys])
        ax.set_xlabel("nodes" if result.rows and result.rows[0].benchmark == "overhead"
                      else "message size")
        ax.set_title(f"{stage} iteration")
    axes[0].set_ylabel("fraction of graph overhead")
    axes[1].legend(fontsize=7)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def render_jacobi(result: BenchResult, out_path: str, title: str) -> str:
    rows = [r for r in result.rows if r.metric == "runtime"]
    comm = [r for r in result.rows if r.metric == "comm_time"]
    sizes = [r.size for r in rows]
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(sizes, [r.speedup for r in rows], marker="o", label="end to end")
    ax.plot(sizes, [r.speedup for r in comm], marker="s", label="communication")
    ax.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
    ax.set_xscale("log", base=2)
    ax.set_xticks(sizes, [_size_label(s) for s in sizes])
    ax.set_xlabel("halo bytes per neighbor")
    ax.set_ylabel("speedup vs single path")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def render_for(kind: str, result: BenchResult, directory: str, stem: str) -> list[str]:
    """Render the figure set appropriate for a benchmark kind."""
    os.makedirs(directory, exist_ok=True)
    out = os.path.join(directory, f"{stem}.png")
    if kind in ("bw", "bibw"):
        return [render_bandwidth(result, out, f"{stem} bandwidth")]
    if kind == "latency":
        figures = []
        if any(r.metric.startswith("fraction_creation") for r in result.rows):
            figures.append(render_phase_breakdown(result, out, f"{stem} phase fractions"))
        return figures
    if kind == "overhead":
        return [render_phase_breakdown(result, out, "graph lifecycle fractions")]
    if kind == "jacobi":
        return [render_jacobi(result, out, f"{stem} speedup")]
    return []
