"""Delimited report output and the figures rendered alongside it.

Every report path emits machine-readable CSV/JSON first; the PNG figures are
companions for quick inspection, never the primary artifact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

EVAL_CSV_HEADER = ["defense", "params", "ap", "precision", "asr"]


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def render_eval_figure(rows, path) -> None:
    """Grouped bars of AP / precision / ASR per defense arm."""
    labels = [r[0] for r in rows]
    ap = [float(r[2]) for r in rows]
    prec = [float(r[3]) for r in rows]
    asr = [float(r[4]) if r[4] != "" else np.nan for r in rows]
    x = np.arange(len(labels))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(labels)), 4))
    ax.bar(x - width, ap, width, label="AP")
    ax.bar(x, prec, width, label="precision")
    ax.bar(x + width, asr, width, label="ASR")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("metric value")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_depth_density_figure(records, path, law=None) -> None:
    """Log-log scatter of depth vs density, real objects vs forged ones."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    real = [(r.depth, r.density) for r in records if not r.is_forged and r.density > 0]
    fake = [(r.depth, r.density) for r in records if r.is_forged and r.density > 0]
    if real:
        arr = np.array(real)
        ax.scatter(arr[:, 0], arr[:, 1], s=9, alpha=0.5, label="real")
    if fake:
        arr = np.array(fake)
        ax.scatter(arr[:, 0], arr[:, 1], s=14, marker="x", color="tab:orange", label="forged")
    if law is not None:
        a, b = law
        d = np.geomspace(3, 80, 64)
        ax.plot(d, a / d**b, "k--", lw=1, label=f"fit a/d^{b:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("depth (m)")
    ax.set_ylabel("point density (pts/m^3)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_diffs_figure(rows, path) -> None:
    """Histograms of global vs local set distances per metric."""
    metrics = sorted({r["metric"] for r in rows})
    fig, axes = plt.subplots(1, max(len(metrics), 1), figsize=(5.5 * max(len(metrics), 1), 4))
    if len(metrics) <= 1:
        axes = [axes]
    for ax, metric in zip(axes, metrics):
        sub = [r for r in rows if r["metric"] == metric]
        ax.hist([r["d_global"] for r in sub], bins=24, alpha=0.55, label="global")
        ax.hist([r["d_half_max_local"] for r in sub], bins=24, alpha=0.55,
                label="half-max local")
        ax.set_title(metric)
        ax.set_xlabel("squared distance")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
