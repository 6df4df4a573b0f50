"""Figure rendering for run and sweep outputs.

Each plotting helper writes a PNG next to the delimited output it
describes. Matplotlib is imported lazily with the Agg backend so
headless use and ``--no-plot`` runs never touch a display.
"""
from __future__ import annotations

from typing import List, Sequence

from .harness import RoundMetrics, SweepEntry


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_run(metrics: Sequence[RoundMetrics], path: str, title: str = "") -> None:
    """Two panels: loss per round, and gradient norms per iteration."""
    plt = _pyplot()
    fig, (ax_loss, ax_grad) = plt.subplots(1, 2, figsize=(10, 4))
    rounds = [m.round_index for m in metrics]
    iters = [m.iters for m in metrics]

    ax_loss.plot(rounds, [m.loss for m in metrics], marker=".", lw=1)
    ax_loss.set_xlabel("round")
    ax_loss.set_ylabel("global loss")
    ax_loss.set_yscale("log")
    ax_loss.grid(True, alpha=0.3)

    ax_grad.plot(iters, [m.grad_norm_sq for m in metrics],
                 marker=".", lw=1, label="instantaneous")
    ax_grad.plot(iters, [m.avg_grad_norm_sq for m in metrics],
                 lw=1.5, label="running average")
    ax_grad.set_xlabel("cumulative local iterations")
    ax_grad.set_ylabel("squared gradient norm")
    ax_grad.set_yscale("log")
    ax_grad.legend()
    ax_grad.grid(True, alpha=0.3)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(entries: Sequence[SweepEntry], path: str) -> None:
    """Median final averaged gradient norm and time-to-target vs N."""
    plt = _pyplot()
    fig, (ax_gns, ax_iters) = plt.subplots(1, 2, figsize=(10, 4))
    ns = [e.n_clients for e in entries]

    med_gns = [e.median_final_avg_gns for e in entries]
    ax_gns.plot(ns, med_gns, marker="o")
    if med_gns[0] > 0:
        ax_gns.plot(ns, [med_gns[0] * ns[0] / n for n in ns], "--",
                    alpha=0.6, label="1/N reference")
        ax_gns.legend()
    ax_gns.set_xlabel("clients N")
    ax_gns.set_ylabel("median final avg grad norm sq")
    ax_gns.set_xscale("log", base=2)
    ax_gns.set_yscale("log")
    ax_gns.grid(True, alpha=0.3)

    finite = [(n, e.median_iters_to_target) for n, e in zip(ns, entries)
              if e.median_iters_to_target != float("inf")]
    if finite:
        ax_iters.plot([n for n, _ in finite], [v for _, v in finite], marker="o")
    ax_iters.set_xlabel("clients N")
    ax_iters.set_ylabel("median iterations to target loss")
    ax_iters.set_xscale("log", base=2)
    ax_iters.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_loss_curves(curves_by_label: List, path: str) -> None:
    """Overlay per-seed loss curves for schedule comparisons.

    ``curves_by_label`` is a list of (label, list-of-curves) pairs; each
    curve is a loss-per-round list.
    """
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for idx, (label, curves) in enumerate(curves_by_label):
        color = colors[idx % len(colors)]
        for j, curve in enumerate(curves):
            ax.plot(range(len(curve)), curve, color=color, alpha=0.5,
                    lw=1, label=label if j == 0 else None)
    ax.set_xlabel("round")
    ax.set_ylabel("global loss")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
