"""Matplotlib figure rendering for the report path.

Figures are written as PNG files alongside the csv sidecars; rendering is
presentation only, every plotted value exists in a sidecar table.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import DistanceStats, TrendSeries
from .report import DEFAULT_XI, DEFAULT_ZETA, heatmap_color
from .thresholds import SweepPoint

_PNG_META = {"Software": "softgate"}


def _save(fig, path):
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def render_confusion(cm: np.ndarray, path) -> None:
    k = cm.shape[0]
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(cm, cmap="Blues")
    thresh = cm.max() / 2 if cm.max() else 0.5
    for y in range(k):
        for c in range(k):
            ax.text(c, y, str(cm[y, c]), ha="center", va="center", fontsize=7,
                    color="white" if cm[y, c] > thresh else "black")
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title("Confusion matrix")
    fig.colorbar(im, ax=ax, shrink=0.8)
    _save(fig, path)


def render_sweep(points: list[SweepPoint], path, metric: str = "coverage") -> None:
    labels = sorted({p.label for p in points}, key=lambda s: (s == "all", s))
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in labels:
        series = sorted((p for p in points if p.label == label), key=lambda p: p.factor)
        xs = [p.factor for p in series]
        ys = [getattr(p, metric if metric != "accuracy" else "retained_accuracy") for p in series]
        style = {"linewidth": 2.2, "color": "black"} if label == "all" else {"linewidth": 1}
        ax.plot(xs, ys, marker=".", label=label, **style)
    ax.set_xlabel("threshold decrement factor")
    ax.set_ylabel(metric)
    ax.set_title(f"{metric} vs threshold decrement")
    ax.legend(fontsize=7, ncol=2)
    _save(fig, path)


def render_likelihood_heatmap(
    L: np.ndarray, path, xi: float = DEFAULT_XI, zeta: float = DEFAULT_ZETA
) -> None:
    """Likelihood matrix with cell backgrounds from the report color rule."""
    k = L.shape[0]
    rgb = np.zeros((k, k, 3), dtype=np.uint8)
    for y in range(k):
        for c in range(k):
            rgb[y, c] = heatmap_color(float(L[y, c]), xi, zeta)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    ax.imshow(rgb)
    for y in range(k):
        for c in range(k):
            ax.text(c, y, f"{L[y, c]:.3f}", ha="center", va="center", fontsize=6)
    ax.set_xlabel("misclassified as")
    ax.set_ylabel("true")
    ax.set_title("Misclassification likelihoods")
    _save(fig, path)


def render_distance_stats(stats: DistanceStats, path) -> None:
    k = len(stats.correct)
    xs = np.arange(k)
    cm = [s.mean for s in stats.correct]
    im = [s.mean for s in stats.incorrect]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(xs - 0.2, cm, width=0.4, label="correct", color="tab:green")
    ax.bar(xs + 0.2, im, width=0.4, label="incorrect", color="tab:red")
    ax.set_yscale("log")
    ax.set_xticks(xs)
    ax.set_xlabel("class")
    ax.set_ylabel("mean distance to centroid")
    ax.set_title("Mean distance by class and correctness")
    ax.legend()
    _save(fig, path)


def render_trends(trends: TrendSeries, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for c in range(trends.d_true.shape[1]):
        ax.plot(trends.levels, trends.d_true[:, c], marker=".", label=str(c))
    ax.set_xlabel("perturbation level")
    ax.set_ylabel("mean distance to true-class centroid")
    ax.set_title("Distance trend by level")
    ax.legend(fontsize=7, ncol=2)
    _save(fig, path)


def render_report_figures(
    out_dir,
    confusion=None,
    sweep=None,
    likelihood=None,
    stats=None,
    trends=None,
    xi: float = DEFAULT_XI,
    zeta: float = DEFAULT_ZETA,
) -> dict[str, str]:
    """Render every figure with available input; returns name -> path."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    if confusion is not None:
        p = os.path.join(out_dir, "confusion_matrix.png")
        render_confusion(confusion, p)
        paths["confusion_matrix.png"] = p
    if sweep is not None:
        p = os.path.join(out_dir, "sweep_coverage.png")
        render_sweep(sweep, p, metric="coverage")
        paths["sweep_coverage.png"] = p
    if likelihood is not None:
        p = os.path.join(out_dir, "likelihood_heatmap.png")
        render_likelihood_heatmap(likelihood, p, xi, zeta)
        paths["likelihood_heatmap.png"] = p
    if stats is not None:
        p = os.path.join(out_dir, "distance_stats.png")
        render_distance_stats(stats, p)
        paths["distance_stats.png"] = p
    if trends is not None:
        p = os.path.join(out_dir, "distance_trends.png")
        render_trends(trends, p)
        paths["distance_trends.png"] = p
    return paths
