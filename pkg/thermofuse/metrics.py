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
Classification metrics: confusion matrix, one-vs-rest metrics, MCC, ROC AUC and fold aggregation.

Per-class metrics are computed one-vs-rest and averaged without weights (macro
average). A metric with a zero denominator contributes 0 to the macro average and is
reported in the flags of the report.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import roc_auc_score, roc_curve

from thermofuse.dataset import NUM_CLASSES
from thermofuse.exceptions import (
    BadLabel,
    EmptyList,
    EmptyMatrix,
    LengthMismatch,
    SingleClassOnly,
)
from thermofuse.utils import PathLike, dump_json, load_json

logger = logging.getLogger(__name__)

METRIC_NAMES = ("precision", "recall", "f1", "sensitivity", "specificity")
AVERAGING = "macro"


@dataclass(frozen=True)
class ConfusionMatrix:
    """
    Confusion matrix: m[i, j] is the number of samples of true class i predicted as class j.
    """

    m: np.ndarray  #: Non-negative integer matrix of shape (6, 6).

    @property
    def total(self) -> int:
        """
        Number of evaluated samples.

        Returns:
            int: sum of all the entries.
        """
        return int(self.m.sum())

    @property
    def support(self) -> np.ndarray:
        """
        Number of samples of each true class.

        Returns:
            np.ndarray: the row sums.
        """
        return self.m.sum(axis=1)


def _check_labels(labels: np.ndarray, name: str) -> None:
    if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
        bad = labels[(labels < 0) | (labels >= NUM_CLASSES)][0]
        raise BadLabel(f"{name} contains the label {bad}, outside of 0..5.")


def _as_labels(labels: Sequence[int], name: str) -> np.ndarray:
    array = np.asarray(labels)
    if array.size == 0:
        return np.zeros(0, dtype=int)
    if not np.issubdtype(array.dtype, np.integer):
        if not np.all(np.equal(np.mod(array, 1), 0)):
            raise BadLabel(f"{name} contains non integer labels.")
        array = array.astype(int)
    _check_labels(array, name)
    return array


def confusion(
    true_labels: Sequence[int], predicted_labels: Sequence[int]
) -> ConfusionMatrix:
    """
    Build the confusion matrix of predictions.

    Args:
        true_labels (Sequence[int]): true grades.
        predicted_labels (Sequence[int]): predicted grades.

    Raises:
        LengthMismatch: if the sequences have different lengths.
        BadLabel: if a label is outside of 0..5.

    Returns:
        ConfusionMatrix: the matrix.
    """
    if len(true_labels) != len(predicted_labels):
        raise LengthMismatch(
            f"{len(true_labels)} true labels but {len(predicted_labels)} predictions."
        )
    true = _as_labels(true_labels, "true labels")
    predicted = _as_labels(predicted_labels, "predicted labels")
    counts = np.bincount(NUM_CLASSES * true + predicted, minlength=NUM_CLASSES**2)
    return ConfusionMatrix(m=counts.reshape(NUM_CLASSES, NUM_CLASSES).astype(np.int64))


def _ratio(num: np.ndarray, den: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    defined = den > 0
    values = np.zeros(num.shape, dtype=np.float64)
    np.divide(num, den, out=values, where=defined)
    return values, defined


def mcc(cm: ConfusionMatrix) -> float:
    """
    Multiclass Matthews correlation coefficient.

    With c the trace, s the total, p the column sums and t the row sums:
    (c s - p.t) / sqrt((s^2 - p.p)(s^2 - t.t)). The value is 0 when one factor of the
    denominator is 0.

    Args:
        cm (ConfusionMatrix): the confusion matrix.

    Raises:
        EmptyMatrix: if the matrix has no sample.

    Returns:
        float: the coefficient, in [-1, 1].
    """
    if cm.total == 0:
        raise EmptyMatrix("Cannot compute the MCC of an empty confusion matrix.")
    m = cm.m.astype(np.float64)
    c = np.trace(m)
    s = m.sum()
    p = m.sum(axis=0)
    t = m.sum(axis=1)
    den = (s**2 - p @ p) * (s**2 - t @ t)
    if den == 0:
        return 0.0
    return float(np.clip((c * s - p @ t) / np.sqrt(den), -1.0, 1.0))


# pylint: disable=too-many-instance-attributes
@dataclass
class MetricsReport:
    """
    Every scalar of an evaluation.
    """

    confusion: np.ndarray  #: Confusion matrix of shape (6, 6).
    per_class: Dict[str, np.ndarray]  #: Mapping metric name -> six per-class values.
    macro: Dict[str, float]  #: Mapping metric name -> macro average.
    mcc: float  #: Matthews correlation coefficient.
    accuracy: float  #: Trace of the confusion matrix over its total.
    support: np.ndarray  #: Number of samples of each true class.
    auc_per_class: Optional[np.ndarray] = None  #: One-vs-rest AUC per class, NaN if undefined.
    auc_macro: Optional[float] = None  #: Mean of the defined per-class AUC.
    flags: List[str] = field(default_factory=list)  #: Diagnostics of undefined values.
    n_reports: int = 1  #: Number of aggregated reports.

    def to_json_dict(self) -> dict:
        """
        Convert the report to its JSON form.

        Returns:
            dict: {confusion, per_class, macro, mcc, accuracy, auc, support, flags, averaging, n_reports}.
        """
        auc = None
        if self.auc_per_class is not None:
            auc = {
                "per_class": [
                    None if np.isnan(v) else float(v) for v in self.auc_per_class
                ],
                "macro": self.auc_macro,
            }
        return {
            "confusion": self.confusion.tolist(),
            "per_class": {
                str(grade): {
                    name: float(self.per_class[name][grade]) for name in METRIC_NAMES
                }
                for grade in range(NUM_CLASSES)
            },
            "macro": {name: float(self.macro[name]) for name in METRIC_NAMES},
            "mcc": float(self.mcc),
            "accuracy": float(self.accuracy),
            "auc": auc,
            "support": [int(v) for v in self.support],
            "flags": list(self.flags),
            "averaging": AVERAGING,
            "n_reports": self.n_reports,
        }

    @classmethod
    def from_json_dict(cls, content: dict) -> "MetricsReport":
        """
        Build a report from its JSON form.

        Args:
            content (dict): the JSON form, as returned by :py:meth:`to_json_dict`.

        Returns:
            MetricsReport: the report.
        """
        per_class = {
            name: np.array(
                [content["per_class"][str(g)][name] for g in range(NUM_CLASSES)]
            )
            for name in METRIC_NAMES
        }
        auc = content.get("auc")
        auc_per_class = None
        auc_macro = None
        if auc is not None:
            auc_per_class = np.array(
                [np.nan if v is None else v for v in auc["per_class"]], dtype=np.float64
            )
            auc_macro = auc["macro"]
        return cls(
            confusion=np.array(content["confusion"], dtype=np.int64),
            per_class=per_class,
            macro=dict(content["macro"]),
            mcc=content["mcc"],
            accuracy=content["accuracy"],
            support=np.array(content["support"], dtype=np.int64),
            auc_per_class=auc_per_class,
            auc_macro=auc_macro,
            flags=list(content.get("flags", [])),
            n_reports=content.get("n_reports", 1),
        )

    def to_csv_row(self) -> Dict[str, float]:
        """
        Flat row of percentages with 2 decimals, as in the comparison tables.

        Returns:
            Dict[str, float]: mapping column -> value.
        """
        row = {"accuracy": round(100 * self.accuracy, 2)}
        for name in METRIC_NAMES:
            row[name] = round(100 * self.macro[name], 2)
        row["mcc"] = round(100 * self.mcc, 2)
        row["auc"] = None if self.auc_macro is None else round(100 * self.auc_macro, 2)
        row["support"] = int(self.support.sum())
        return row

    def save(self, directory: PathLike, prefix: str = "metrics") -> Path:
        """
        Write the report as <prefix>.json and <prefix>.csv.

        Args:
            directory (PathLike): output directory.
            prefix (str, optional): name of the files. Defaults to "metrics".

        Returns:
            Path: path of the JSON file.
        """
        directory = Path(directory)
        json_path = directory / f"{prefix}.json"
        dump_json(self.to_json_dict(), json_path)
        pd.DataFrame([self.to_csv_row()]).to_csv(
            directory / f"{prefix}.csv", index=False
        )
        return json_path

    @classmethod
    def load(cls, path: PathLike) -> "MetricsReport":
        """
        Read a report written by :py:meth:`save`.

        Args:
            path (PathLike): path of the JSON file.

        Returns:
            MetricsReport: the report.
        """
        return cls.from_json_dict(load_json(path))


def per_class_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """
    Compute the one-vs-rest metrics of every class and their macro averages.

    Args:
        cm (ConfusionMatrix): the confusion matrix.

    Raises:
        EmptyMatrix: if the matrix has no sample.

    Returns:
        MetricsReport: the report, without AUC.
    """
    if cm.total == 0:
        raise EmptyMatrix("Cannot compute metrics of an empty confusion matrix.")
    m = cm.m.astype(np.float64)
    total = m.sum()
    tp = np.diag(m)
    fp = m.sum(axis=0) - tp
    fn = m.sum(axis=1) - tp
    tn = total - tp - fp - fn

    precision, precision_defined = _ratio(tp, tp + fp)
    recall, recall_defined = _ratio(tp, tp + fn)
    specificity, specificity_defined = _ratio(tn, tn + fp)
    f1, f1_defined = _ratio(2 * precision * recall, precision + recall)

    flags = []
    for name, defined in (
        ("precision", precision_defined),
        ("recall", recall_defined),
        ("specificity", specificity_defined),
        ("f1", f1_defined),
    ):
        for grade in np.flatnonzero(~defined):
            flags.append(f"{name} of grade {grade} is undefined and counted as 0")
    for flag in flags:
        logger.warning(flag)

    per_class = {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "sensitivity": recall.copy(),
        "specificity": specificity,
    }
    return MetricsReport(
        confusion=cm.m.copy(),
        per_class=per_class,
        macro={name: float(values.mean()) for name, values in per_class.items()},
        mcc=mcc(cm),
        accuracy=float(tp.sum() / total),
        support=cm.support,
        flags=flags,
    )


def roc_auc(
    true_labels: Sequence[int], probabilities: np.ndarray
) -> Tuple[np.ndarray, float, List[str]]:
    """
    One-vs-rest ROC AUC of every class.

    Ties count for one half. The AUC of a class is undefined when the class is absent
    from the labels or is the only one present; it is then NaN, excluded from the macro
    average and flagged.

    Args:
        true_labels (Sequence[int]): true grades.
        probabilities (np.ndarray): scores of shape (N, 6).

    Raises:
        LengthMismatch: if the numbers of labels and score rows differ.
        BadLabel: if a label is outside of 0..5.
        SingleClassOnly: if no class has a defined AUC.

    Returns:
        Tuple[np.ndarray, float, List[str]]: per-class AUC, macro AUC and flags.
    """
    true = _as_labels(true_labels, "true labels")
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.shape != (len(true), NUM_CLASSES):
        raise LengthMismatch(
            f"Expected scores of shape ({len(true)}, {NUM_CLASSES}), got {probabilities.shape}."
        )
    aucs = np.full(NUM_CLASSES, np.nan)
    flags = []
    for grade in range(NUM_CLASSES):
        positives = true == grade
        n_pos = int(positives.sum())
        if 0 < n_pos < len(true):
            aucs[grade] = roc_auc_score(positives, probabilities[:, grade])
        else:
            flags.append(f"AUC of grade {grade} is undefined ({n_pos} positives)")
    defined = ~np.isnan(aucs)
    if not defined.any():
        raise SingleClassOnly("No grade has both positive and negative samples.")
    return aucs, float(aucs[defined].mean()), flags


def roc_curves(
    true_labels: Sequence[int], probabilities: np.ndarray
) -> Dict[int, Tuple[np.ndarray, np.ndarray, float]]:
    """
    One-vs-rest ROC curves of the classes with a defined AUC.

    Args:
        true_labels (Sequence[int]): true grades.
        probabilities (np.ndarray): scores of shape (N, 6).

    Returns:
        Dict[int, Tuple[np.ndarray, np.ndarray, float]]: mapping grade -> (false positive rates, true positive rates, AUC).
    """
    true = _as_labels(true_labels, "true labels")
    probabilities = np.asarray(probabilities, dtype=np.float64)
    curves = {}
    for grade in range(NUM_CLASSES):
        positives = true == grade
        if 0 < positives.sum() < len(true):
            fpr, tpr, _ = roc_curve(positives, probabilities[:, grade])
            auc = float(roc_auc_score(positives, probabilities[:, grade]))
            curves[grade] = (fpr, tpr, auc)
    return curves


def compute_report(
    true_labels: Sequence[int],
    predicted_labels: Optional[Sequence[int]] = None,
    probabilities: Optional[np.ndarray] = None,
) -> MetricsReport:
    """
    Compute the full report of an evaluation.

    Args:
        true_labels (Sequence[int]): true grades.
        predicted_labels (Optional[Sequence[int]], optional): predicted grades, the argmax of the probabilities if None. Defaults to None.
        probabilities (Optional[np.ndarray], optional): scores of shape (N, 6), to compute the AUC. Defaults to None.

    Returns:
        MetricsReport: the report.
    """
    if predicted_labels is None:
        if probabilities is None:
            raise ValueError("Either the predictions or the probabilities are needed.")
        predicted_labels = np.argmax(np.asarray(probabilities), axis=1)
    report = per_class_metrics(confusion(true_labels, predicted_labels))
    if probabilities is not None:
        try:
            report.auc_per_class, report.auc_macro, flags = roc_auc(
                true_labels, probabilities
            )
            report.flags.extend(flags)
        except SingleClassOnly as exc:
            logger.warning("AUC not computed: %s", exc)
            report.flags.append(str(exc))
    return report


def aggregate_folds(reports: Sequence[MetricsReport]) -> MetricsReport:
    """
    Average reports, typically the test evaluations of the models of every fold.

    Every scalar is the unweighted mean over the reports. The confusion matrices and the
    supports are summed.

    Args:
        reports (Sequence[MetricsReport]): the reports.

    Raises:
        EmptyList: if no report is given.

    Returns:
        MetricsReport: the aggregated report.
    """
    if not reports:
        raise EmptyList("Cannot aggregate an empty list of reports.")

    auc_per_class = None
    auc_macro = None
    with_auc = [r for r in reports if r.auc_per_class is not None]
    if with_auc:
        stacked = np.stack([r.auc_per_class for r in with_auc])
        defined = ~np.isnan(stacked)
        sums = np.where(defined, stacked, 0.0).sum(axis=0)
        counts = defined.sum(axis=0)
        auc_per_class = np.full(NUM_CLASSES, np.nan)
        np.divide(sums, counts, out=auc_per_class, where=counts > 0)
        auc_macro = float(np.mean([r.auc_macro for r in with_auc]))

    flags = []
    for report in reports:
        flags.extend(f for f in report.flags if f not in flags)

    return MetricsReport(
        confusion=np.sum([r.confusion for r in reports], axis=0),
        per_class={
            name: np.mean([r.per_class[name] for r in reports], axis=0)
            for name in METRIC_NAMES
        },
        macro={
            name: float(np.mean([r.macro[name] for r in reports]))
            for name in METRIC_NAMES
        },
        mcc=float(np.mean([r.mcc for r in reports])),
        accuracy=float(np.mean([r.accuracy for r in reports])),
        support=np.sum([r.support for r in reports], axis=0),
        auc_per_class=auc_per_class,
        auc_macro=auc_macro,
        flags=flags,
        n_reports=sum(r.n_reports for r in reports),
    )


def markdown_row(backbone: str, modality: str, report: MetricsReport) -> str:
    """
    Format a report as a row of the comparison table.

    Args:
        backbone (str): identifier of the backbone.
        modality (str): name of the dataset.
        report (MetricsReport): the report.

    Returns:
        str: the markdown row.
    """
    row = report.to_csv_row()
    cells = [modality, backbone] + [
        f"{row[name]:.2f}"
        for name in (
            "accuracy",
            "precision",
            "recall",
            "f1",
            "specificity",
            "sensitivity",
            "mcc",
        )
    ]
    return "| " + " | ".join(cells) + " |"


MARKDOWN_HEADER = (
    "| Dataset | CNN Model | Accuracy (%) | Precision (%) | Recall (%) | F1-Score (%) "
    "| Specificity (%) | Sensitivity (%) | MCC (%) |\n"
    "|---|---|---|---|---|---|---|---|---|"
)
