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

"""Tests of the metrics against brute-force oracles."""

import numpy as np
import pytest
from sklearn.metrics import matthews_corrcoef

from thermofuse.exceptions import (
    BadLabel,
    EmptyList,
    EmptyMatrix,
    LengthMismatch,
    SingleClassOnly,
)
from thermofuse.metrics import (
    MARKDOWN_HEADER,
    ConfusionMatrix,
    MetricsReport,
    aggregate_folds,
    compute_report,
    confusion,
    markdown_row,
    mcc,
    per_class_metrics,
    roc_auc,
)

#: Test accuracy of the five VGG16 fused models, in %, and the number of correct predictions out of 166.
FOLD_CORRECT = [156, 150, 157, 155, 156]


def labels_from_matrix(m):
    true, predicted = [], []
    for i in range(6):
        for j in range(6):
            true += [i] * int(m[i, j])
            predicted += [j] * int(m[i, j])
    return np.array(true), np.array(predicted)


def brute_force(m):
    """One-vs-rest tallies by walking the samples."""
    true, predicted = labels_from_matrix(m)
    out = {name: [] for name in ("precision", "recall", "specificity", "f1")}
    for c in range(6):
        tp = np.sum((true == c) & (predicted == c))
        fp = np.sum((true != c) & (predicted == c))
        fn = np.sum((true == c) & (predicted != c))
        tn = np.sum((true != c) & (predicted != c))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        out["precision"].append(precision)
        out["recall"].append(recall)
        out["specificity"].append(tn / (tn + fp) if tn + fp else 0.0)
        out["f1"].append(
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
    return {k: np.array(v) for k, v in out.items()}, np.mean(true == predicted)


def pair_counting_auc(positive_scores, negative_scores):
    wins = 0.0
    for p in positive_scores:
        wins += np.sum(p > negative_scores) + 0.5 * np.sum(p == negative_scores)
    return wins / (len(positive_scores) * len(negative_scores))


class TestConfusion:
    """Construction of the confusion matrix."""

    def test_counts(self):
        cm = confusion([0, 1, 1, 5], [0, 1, 2, 5])
        assert cm.total == 4
        assert cm.m[1, 2] == 1
        np.testing.assert_array_equal(cm.support, [1, 2, 0, 0, 0, 1])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([0, 1], [0])

    @pytest.mark.parametrize("bad", [[6], [-1]])
    def test_bad_label(self, bad):
        with pytest.raises(BadLabel):
            confusion(bad, [0])


class TestAgainstOracles:
    """Random confusion matrices against brute-force computations."""

    def test_random_matrices(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            m = rng.integers(0, 20, size=(6, 6))
            if m.sum() == 0:
                continue
            report = per_class_metrics(ConfusionMatrix(m))
            expected, accuracy = brute_force(m)
            for name, values in expected.items():
                np.testing.assert_allclose(report.per_class[name], values, atol=1e-9)
                assert report.macro[name] == pytest.approx(values.mean(), abs=1e-9)
            np.testing.assert_allclose(
                report.per_class["sensitivity"], expected["recall"]
            )
            assert report.accuracy == pytest.approx(accuracy, abs=1e-9)
            true, predicted = labels_from_matrix(m)
            oracle = matthews_corrcoef(true, predicted)
            assert report.mcc == pytest.approx(oracle, abs=1e-9)

    def test_auc_against_pair_counting(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            n = int(rng.integers(12, 40))
            true = rng.integers(0, 6, size=n)
            scores = rng.random((n, 6))
            # Coarse scores produce ties.
            scores = np.round(scores, 1)
            aucs, macro, _ = roc_auc(true, scores)
            defined = []
            for c in range(6):
                positives = true == c
                if 0 < positives.sum() < n:
                    expected = pair_counting_auc(
                        scores[positives, c], scores[~positives, c]
                    )
                    assert aucs[c] == pytest.approx(expected, abs=1e-9)
                    defined.append(expected)
                else:
                    assert np.isnan(aucs[c])
            assert macro == pytest.approx(np.mean(defined), abs=1e-9)


class TestMcc:
    """Matthews correlation coefficient."""

    def test_identity(self):
        assert mcc(ConfusionMatrix(np.eye(6, dtype=int) * 7)) == pytest.approx(1.0)

    def test_uniform(self):
        assert mcc(ConfusionMatrix(np.ones((6, 6), dtype=int))) == pytest.approx(0.0)

    def test_derangement(self):
        m = np.roll(np.eye(6, dtype=int), 1, axis=1)
        assert mcc(ConfusionMatrix(m)) == pytest.approx(-0.2)

    def test_constant_prediction(self):
        m = np.zeros((6, 6), dtype=int)
        m[:, 0] = 5
        assert mcc(ConfusionMatrix(m)) == 0.0

    def test_invariances(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            m = rng.integers(0, 10, size=(6, 6))
            value = mcc(ConfusionMatrix(m))
            perm = rng.permutation(6)
            permuted = ConfusionMatrix(m[np.ix_(perm, perm)])
            assert mcc(permuted) == pytest.approx(value, abs=1e-12)
            assert mcc(ConfusionMatrix(3 * m)) == pytest.approx(value, abs=1e-12)
            assert -1.0 <= value <= 1.0

    def test_empty(self):
        with pytest.raises(EmptyMatrix):
            mcc(ConfusionMatrix(np.zeros((6, 6), dtype=int)))


class TestReports:
    """Reports, undefined values and aggregation."""

    def test_absent_class_is_flagged(self):
        report = compute_report([0, 0, 1, 1], [0, 0, 1, 1])
        assert report.accuracy == 1.0
        assert report.per_class["recall"][3] == 0.0
        assert any("recall of grade 3" in flag for flag in report.flags)

    def test_single_class_auc(self):
        with pytest.raises(SingleClassOnly):
            roc_auc([2, 2, 2], np.full((3, 6), 1 / 6))
        report = compute_report([2, 2, 2], probabilities=np.full((3, 6), 1 / 6))
        assert report.auc_macro is None
        assert report.flags

    def test_probabilities_give_predictions(self):
        probabilities = np.eye(6)[[0, 1, 2, 3, 4, 5, 5]]
        report = compute_report([0, 1, 2, 3, 4, 5, 4], probabilities=probabilities)
        assert report.confusion[4, 5] == 1
        assert report.accuracy == pytest.approx(6 / 7)

    def test_aggregate_clinical_folds(self):
        reports = []
        for correct in FOLD_CORRECT:
            m = np.zeros((6, 6), dtype=int)
            m[0, 0] = correct
            m[1, 2] = 166 - correct
            reports.append(per_class_metrics(ConfusionMatrix(m)))
        accuracies = [round(100 * r.accuracy, 2) for r in reports]
        assert accuracies == [93.98, 90.36, 94.58, 93.37, 93.98]
        aggregate = aggregate_folds(reports)
        assert 100 * aggregate.accuracy == pytest.approx(93.25, abs=0.01)
        assert aggregate.n_reports == 5
        assert aggregate.confusion.sum() == 5 * 166

    def test_aggregate_empty(self):
        with pytest.raises(EmptyList):
            aggregate_folds([])

    def test_save_and_load(self, tmp_path):
        rng = np.random.default_rng(3)
        true = rng.integers(0, 6, size=60)
        report = compute_report(true, probabilities=rng.dirichlet(np.ones(6), size=60))
        path = report.save(tmp_path)
        loaded = MetricsReport.load(path)
        assert loaded.to_json_dict() == report.to_json_dict()
        assert (tmp_path / "metrics.csv").is_file()

    def test_markdown_row(self):
        report = compute_report([0, 1, 2, 3, 4, 5], [0, 1, 2, 3, 4, 5])
        row = markdown_row("VGG16", "RGB+Thermal", report)
        assert row.startswith("| RGB+Thermal | VGG16 | 100.00 |")
        assert row.count("|") == MARKDOWN_HEADER.splitlines()[0].count("|")
