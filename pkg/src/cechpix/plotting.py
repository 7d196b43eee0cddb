"""Persistence-diagram figures: birth/death axes, the diagonal, one marker
per point, and essential classes on a rail above the finite range."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def _axis_limits(diagrams):
    vals = [0.0]
    for dia in diagrams:
        for _, b, d in dia.points:
            vals.append(b)
            if not math.isinf(d):
                vals.append(d)
    top = max(vals) if vals else 1.0
    if top <= 0:
        top = 1.0
    return -0.05 * top, 1.05 * top


def plot_diagram(diagram, path, title=None, labels=None):
    return plot_diagrams([diagram], path, title=title, labels=labels)


def plot_diagrams(diagrams, path, title=None, labels=None):
    """Render one or more diagrams into a single figure file."""
    lo, hi = _axis_limits(diagrams)
    rail = hi + 0.1 * (hi - lo)
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.plot([lo, rail], [lo, rail], color="0.6", lw=1.0, ls="--", zorder=1)
    ax.axhline(rail, color="0.75", lw=0.8, ls=":", zorder=1)
    markers = ["o", "s", "D"]
    dims = sorted({d for dia in diagrams for d, _, _ in dia.points})
    for di, dia in enumerate(diagrams):
        label_base = labels[di] if labels else None
        for dim in dims:
            finite = [(b, d) for dd, b, d in dia.points if dd == dim and not math.isinf(d)]
            essential = [b for dd, b, d in dia.points if dd == dim and math.isinf(d)]
            color = f"C{dim}"
            marker = markers[di % len(markers)]
            name = f"H{dim}" + (f" {label_base}" if label_base else "")
            if finite:
                xs, ys = zip(*finite)
                ax.scatter(xs, ys, s=22, c=color, marker=marker, label=name, zorder=3,
                           alpha=0.8 if di else 1.0)
            if essential:
                ax.scatter(essential, [rail] * len(essential), s=30, c=color,
                           marker="^", zorder=3, label=name + " (ess)" if not finite else None)
    ax.text(lo, rail, " inf", va="bottom", ha="left", fontsize=8, color="0.4")
    ax.set_xlabel("birth")
    ax.set_ylabel("death")
    ax.set_xlim(lo, rail + 0.05 * (hi - lo))
    ax.set_ylim(lo, rail + 0.05 * (hi - lo))
    if title:
        ax.set_title(title)
    handles, names = ax.get_legend_handles_labels()
    if handles:
        seen = {}
        for h, nm in zip(handles, names):
            seen.setdefault(nm, h)
        ax.legend(seen.values(), seen.keys(), fontsize=8, loc="lower right")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
