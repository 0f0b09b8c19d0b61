"""Figures for the CLI report path (rendered off screen to PNG files)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return str(path)


def plot_net(pos, path, classes=None, title="surface net", max_points=60_000):
    pos = np.asarray(pos)
    step = max(1, len(pos) // max_points)
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    c = None if classes is None else np.asarray(classes)[::step]
    ax.scatter(*pos[::step].T, s=1, c=c, cmap="tab20" if c is not None else None)
    ax.set_title(f"{title} ({len(pos)} points)")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    return _save(fig, path)


def plot_convergence(hs, values, path, reference=None, label="geodesic length"):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogx(hs, values, "o-", label=label)
    if reference is not None:
        ax.axhline(reference, color="k", ls="--", lw=1, label=f"reference {reference:.6g}")
    ax.invert_xaxis()
    ax.set_xlabel("sampling step h")
    ax.set_ylabel("length")
    ax.legend()
    return _save(fig, path)


def plot_tour(sites, order, path, title="tour", obstacles=None):
    """Tour drawn in the (x, z) projection, obstacles as light outlines."""
    sites = np.asarray(sites, float)
    fig, ax = plt.subplots(figsize=(6, 4))
    if obstacles is not None and len(obstacles.triangles):
        tri = obstacles.triangles[:: max(1, len(obstacles.triangles) // 5000)]
        for t in tri:
            ax.fill(t[:, 0], t[:, 2], color="0.85", lw=0)
    o = list(order) + [order[0]]
    ax.plot(sites[o, 0], sites[o, 2], "o-", color="C3")
    for k, p in enumerate(sites):
        ax.annotate(str(k), (p[0], p[2]), textcoords="offset points", xytext=(4, 4))
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title(title)
    return _save(fig, path)


def plot_layout(sample_pos, sites, path, witness=None):
    """Side view (x, z) of a realisation surface with its embedded sites."""
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.scatter(sample_pos[:, 0], sample_pos[:, 2], s=0.2, color="0.5")
    ax.plot(sites[:, 0], sites[:, 2], "o", color="C0")
    for w in witness or []:
        ax.plot(w[:, 0], w[:, 2], "-", color="C3", lw=1)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title("tube layout, side view")
    return _save(fig, path)


def plot_scaling(xs, ys, path, xlabel="sigma", ylabel="obstacle count", slope=None):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(xs, ys, "o-")
    if slope is not None:
        ref = ys[0] * (np.asarray(xs) / xs[0]) ** slope
        ax.loglog(xs, ref, "k--", lw=1, label=f"slope {slope}")
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save(fig, path)


def plot_matrix(D, path, title="distance matrix"):
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(np.asarray(D, float), cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_title(title)
    return _save(fig, path)
