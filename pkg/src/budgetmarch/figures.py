"""Matplotlib figure rendering for the report path (written next to the CSVs)."""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle


def _finite_for_plot(values):
    v = np.asarray(values, dtype=float).copy()
    finite = np.isfinite(v)
    if not finite.any():
        return np.zeros_like(v)
    v[~finite] = np.nan
    return v


def field_figure(path, values, h, title="", trajectories=(), obstacles=(),
                 visibility_mask=None, points=(), levels=21):
    """Contour plot of a spatial field with optional overlays.

    trajectories: iterables of (label, (m,2) points); points: (label, (x,y)).
    """
    v = _finite_for_plot(values)
    nx, ny = v.shape
    xs = np.linspace(0, 1, nx)
    ys = np.linspace(0, 1, ny)
    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    cs = ax.contourf(xs, ys, v.T, levels=levels, cmap="viridis")
    fig.colorbar(cs, ax=ax, shrink=0.9)
    if np.isfinite(v).any():
        ax.contour(xs, ys, v.T, levels=min(levels, 15), colors="k",
                   linewidths=0.3, alpha=0.4)
    if visibility_mask is not None:
        ax.contour(xs, ys, np.asarray(visibility_mask, dtype=float).T,
                   levels=[0.5], colors="0.4", linewidths=2.0)
    for rect in obstacles:
        ax.add_patch(Rectangle((rect.x0, rect.y0), rect.x1 - rect.x0,
                               rect.y1 - rect.y0, facecolor="0.25",
                               edgecolor="k"))
    for label, pts in trajectories:
        pts = np.asarray(pts)
        if len(pts):
            ax.plot(pts[:, 0], pts[:, 1], linewidth=1.8, label=label)
    for label, (px, py) in points:
        ax.plot([px], [py], "o", markersize=5)
        ax.annotate(label, (px, py), textcoords="offset points", xytext=(4, 4),
                    fontsize=8)
    if trajectories:
        ax.legend(loc="best", fontsize=8)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def front_figure(path, fronts, title="Pareto front", envelope=None):
    """Cost-vs-budget scatter of one or more fronts (r = 1)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.6))
    markers = {"augmented": "o", "weighted-sum": "s"}
    for front in fronts:
        if not len(front.points):
            continue
        b = front.points[:, 1]
        j0 = front.points[:, 0]
        ax.plot(b, j0, markers.get(front.source, "."), markersize=4,
                linestyle="-" if front.source == "augmented" else "none",
                linewidth=0.8, label=front.source)
    if envelope is not None:
        bs = np.linspace(envelope[0], envelope[1], 200)
        ax.plot(bs, [envelope[2](b) for b in bs], "--", color="0.5",
                linewidth=1.0, label="weighted-sum envelope")
    ax.set_xlabel("secondary budget b1")
    ax.set_ylabel("primary cost J0")
    ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def convergence_figure(path, table, title="Convergence"):
    """log-log error plot; table rows are (h, db1, l1, linf)."""
    fig, ax = plt.subplots(figsize=(5.6, 4.4))
    by_db = {}
    for h, db1, l1, linf in table:
        by_db.setdefault(db1, []).append((h, l1, linf))
    for db1, rows in sorted(by_db.items()):
        rows.sort()
        hs = [r[0] for r in rows]
        ax.loglog(hs, [r[1] for r in rows], "o-", label=f"L1, db1={db1:.4g}")
        ax.loglog(hs, [r[2] for r in rows], "s--", label=f"Linf, db1={db1:.4g}")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend(fontsize=7)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
