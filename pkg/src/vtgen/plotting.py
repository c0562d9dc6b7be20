"""File-only figures: confusion matrices, loss curves, sample grids, ablation bars."""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def confusion_figure(confusion, path, class_names=None, title="confusion"):
    cm = np.asarray(confusion, dtype=float)
    rows = cm.sum(axis=1, keepdims=True)
    frac = np.divide(cm, rows, out=np.zeros_like(cm), where=rows > 0)
    names = class_names or [str(i) for i in range(len(cm))]
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * len(cm), 0.8 + 0.6 * len(cm)))
    ax.imshow(frac, cmap="Blues", vmin=0, vmax=1)
    for i in range(len(cm)):
        for j in range(len(cm)):
            ax.text(j, i, f"{frac[i, j]:.2f}", ha="center", va="center",
                    color="white" if frac[i, j] > 0.5 else "black", fontsize=8)
    ax.set_xticks(range(len(cm)), names, rotation=45)
    ax.set_yticks(range(len(cm)), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    return _save(fig, path)


def loss_curves(csv_path, path, columns=("critic_loss", "l_adv", "l_fm", "l_p", "l_total")):
    with Path(csv_path).open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{csv_path} has no rows")
    steps = [int(r["step"]) for r in rows]
    fig, axes = plt.subplots(len(columns), 1, figsize=(6, 1.6 * len(columns)), sharex=True)
    for ax, col in zip(np.atleast_1d(axes), columns):
        ax.plot(steps, [float(r[col]) for r in rows], lw=0.8)
        ax.set_ylabel(col, fontsize=8)
    np.atleast_1d(axes)[-1].set_xlabel("generator step")
    return _save(fig, path)


def sample_grid(sources, outputs, targets, path, title=None):
    """Rows of (input, generated, reference) arrays in [-1, 1]."""
    n = len(outputs)
    fig, axes = plt.subplots(n, 3, figsize=(4.5, 1.5 * n), squeeze=False)
    for i in range(n):
        for j, (img, label) in enumerate(((sources[i], "input"), (outputs[i], "generated"),
                                          (targets[i], "reference"))):
            ax = axes[i, j]
            ax.imshow(np.squeeze(img), cmap="gray", vmin=-1, vmax=1, origin="upper")
            ax.set_xticks([])
            ax.set_yticks([])
            if i == 0:
                ax.set_title(label, fontsize=8)
    if title:
        fig.suptitle(title, fontsize=9)
    return _save(fig, path)


def ablation_bars(rows, path):
    labels = [f"{r['direction']}:{r['variant']}" for r in rows]
    acc = [float(r["accuracy"]) for r in rows]
    fig, ax = plt.subplots(figsize=(1 + 0.5 * len(rows), 3))
    ax.bar(range(len(rows)), acc, color="tab:blue")
    ax.set_xticks(range(len(rows)), labels, rotation=60, fontsize=7)
    ax.set_ylim(0, 1)
    ax.set_ylabel("accuracy of generated data")
    return _save(fig, path)
