"""Matplotlib renderings written alongside the text reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from hijackmap.evaluation import ComparisonTable
from hijackmap.geomap import MapDocument


def save_comparison_figure(table: ComparisonTable, path: str | Path) -> None:
    """Two-panel bar chart: accuracies and losses per architecture."""
    rows = [r for r in table.in_catalog_order() if r.error is None]
    labels = [str(r.arch) for r in rows]
    x = np.arange(len(rows))
    width = 0.2

    fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(11, 4.2))
    panels = (
        (ax_acc, "accuracy", [("train_acc", "TrainAcc"), ("val_acc", "ValAcc"),
                              ("f1", "Test F1")]),
        (ax_loss, "loss", [("train_loss", "TrainLoss"), ("val_loss", "ValLoss")]),
    )
    for ax, title, series in panels:
        for i, (attr, label) in enumerate(series):
            values = [getattr(r, attr) or 0.0 for r in rows]
            ax.bar(x + (i - (len(series) - 1) / 2) * width, values, width, label=label)
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=20, ha="right")
        ax.set_title(f"{table.family} {title}")
        ax.legend(fontsize=8)
        ax.grid(axis="y", alpha=0.3)
    if not rows:
        fig.suptitle(f"{table.family}: no trainable variants")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_map_figure(doc: MapDocument, path: str | Path) -> None:
    """Scatter point map; marker area scales with mention count."""
    fig, ax = plt.subplots(figsize=(7, 7))
    if doc.points:
        lons = [p.lon for p in doc.points]
        lats = [p.lat for p in doc.points]
        sizes = [40 + 60 * p.mentions for p in doc.points]
        ax.scatter(lons, lats, s=sizes, c="#b30000", alpha=0.6, edgecolors="black")
        for p in doc.points:
            ax.annotate(f"{p.name} ({p.mentions})", (p.lon, p.lat),
                        textcoords="offset points", xytext=(5, 4), fontsize=8)
    ax.scatter([doc.center[1]], [doc.center[0]], marker="+", s=120, c="blue",
               label="map center")
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title(f"Hijacking mentions within {doc.radius_km:g} km of center")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
