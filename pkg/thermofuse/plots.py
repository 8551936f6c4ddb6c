# thermofuse - RGB and thermal image fusion for diabetic foot ulcer staging.
# Copyright (C) 2025-2026 The thermofuse developers

# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.

# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.

# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""
Figures of the evaluations: accuracy comparison, confusion matrix and ROC curves.
"""
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

# pylint: disable=wrong-import-position
import matplotlib.pyplot as plt
import numpy as np

from thermofuse.utils import PathLike

GRADE_LABELS = [f"Grade {g}" for g in range(6)]


def plot_accuracy_comparison(
    rows: Sequence[Tuple[str, str, float]], path: PathLike
) -> Dict[str, List[float]]:
    """
    Grouped bar chart of the accuracy of every backbone on every dataset.

    Args:
        rows (Sequence[Tuple[str, str, float]]): (backbone, dataset name, accuracy in %).
        path (PathLike): output path.

    Returns:
        Dict[str, List[float]]: mapping dataset name -> plotted accuracies, in backbone order.
    """
    backbones = list(dict.fromkeys(row[0] for row in rows))
    datasets = list(dict.fromkeys(row[1] for row in rows))
    lookup = {(row[0], row[1]): row[2] for row in rows}
    plotted = {
        dataset: [lookup.get((backbone, dataset), np.nan) for backbone in backbones]
        for dataset in datasets
    }

    fig, ax = plt.subplots(figsize=(10, 5))
    width = 0.8 / max(len(datasets), 1)
    positions = np.arange(len(backbones))
    for i, dataset in enumerate(datasets):
        bars = ax.bar(positions + i * width, plotted[dataset], width, label=dataset)
        ax.bar_label(bars, fmt="%.2f", fontsize=7)
    ax.set_xticks(positions + width * (len(datasets) - 1) / 2)
    ax.set_xticklabels(backbones)
    ax.set_ylabel("Overall accuracy (%)")
    ax.set_ylim(0, 105)
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)
    return plotted


def plot_confusion(cm: np.ndarray, path: PathLike, title: str = "") -> None:
    """
    Plot a confusion matrix.

    Args:
        cm (np.ndarray): matrix of shape (6, 6), true grades in rows.
        path (PathLike): output path.
        title (str, optional): title of the figure. Defaults to "".
    """
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(cm, cmap="Blues")
    fig.colorbar(image, ax=ax)
    threshold = cm.max() / 2 if cm.size else 0
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(
                j,
                i,
                int(cm[i, j]),
                ha="center",
                va="center",
                color="white" if cm[i, j] > threshold else "black",
            )
    ax.set_xticks(range(cm.shape[1]))
    ax.set_yticks(range(cm.shape[0]))
    ax.set_xlabel("Predicted grade")
    ax.set_ylabel("True grade")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)


def plot_roc(
    curves: Dict[int, Tuple[np.ndarray, np.ndarray, float]],
    path: PathLike,
    title: str = "",
) -> None:
    """
    Plot one-vs-rest ROC curves.

    Args:
        curves (Dict[int, Tuple[np.ndarray, np.ndarray, float]]): mapping grade -> (false positive rates, true positive rates, AUC).
        path (PathLike): output path.
        title (str, optional): title of the figure. Defaults to "".
    """
    fig, ax = plt.subplots(figsize=(6, 5))
    for grade, (fpr, tpr, auc) in sorted(curves.items()):
        ax.plot(fpr, tpr, label=f"{GRADE_LABELS[grade]} (AUC = {auc:.3f})")
    ax.plot([0, 1], [0, 1], "k--", linewidth=0.8)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)
