"""Splitting, metrics, and the AUC rank statistic."""
import numpy as np
import pytest

from topovox.errors import (
    FormatError,
    InsufficientDataError,
    OutOfRangeError,
    ShapeError,
    UndefinedMetricError,
)
from topovox.evaluate import (
    EvalReport,
    compute_metrics,
    confusion_matrix,
    encode_labels,
    rank_auc,
    report_lines,
    split_80_20,
    stratified_kfold,
    write_confusion_csv,
    write_report,
)


class TestEncodeLabels:
    def test_strings(self):
        assert np.array_equal(encode_labels(["LGG", "HGG", "HGG"]), [0, 1, 1])

    def test_ints_pass_through(self):
        assert np.array_equal(encode_labels([0, 1, 1, 0]), [0, 1, 1, 0])

    def test_unknown_string(self):
        with pytest.raises(FormatError):
            encode_labels(["LGG", "GBM"])

    def test_bad_numeric(self):
        with pytest.raises(FormatError):
            encode_labels([0, 2])
        with pytest.raises(FormatError):
            encode_labels([0.5, 1.0])


class TestSplit:
    def test_paper_scale_counts(self):
        labels = ["HGG"] * 293 + ["LGG"] * 76
        train, test = split_80_20(labels, seed=0)
        assert len(test) == 74
        assert len(train) == 295
        y = encode_labels(labels)
        assert int(y[test].sum()) == 59  # HGG share of the test set
        assert len(test) - int(y[test].sum()) == 15

    def test_balanced_small(self):
        labels = ["LGG"] * 10 + ["HGG"] * 10
        train, test = split_80_20(labels, seed=1)
        assert len(test) == 4
        y = encode_labels(labels)
        assert int(y[test].sum()) == 2

    def test_partition(self):
        labels = ["LGG"] * 30 + ["HGG"] * 50
        train, test = split_80_20(labels, seed=3)
        merged = np.sort(np.concatenate([train, test]))
        assert np.array_equal(merged, np.arange(80))
        assert len(np.intersect1d(train, test)) == 0

    def test_deterministic(self):
        labels = ["LGG"] * 20 + ["HGG"] * 25
        a = split_80_20(labels, seed=5)
        b = split_80_20(labels, seed=5)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])

    def test_seed_changes_split(self):
        labels = ["LGG"] * 20 + ["HGG"] * 25
        a = split_80_20(labels, seed=0)
        b = split_80_20(labels, seed=1)
        assert not np.array_equal(a[1], b[1])

    def test_small_class_rejected(self):
        with pytest.raises(InsufficientDataError):
            split_80_20(["LGG"] * 4 + ["HGG"] * 40)
        with pytest.raises(InsufficientDataError):
            split_80_20(["HGG"] * 40)

    def test_sorted_outputs(self):
        labels = ["LGG"] * 12 + ["HGG"] * 12
        train, test = split_80_20(labels, seed=2)
        assert np.all(np.diff(train) > 0)
        assert np.all(np.diff(test) > 0)


class TestKFold:
    def test_folds_partition_the_data(self):
        labels = ["LGG"] * 13 + ["HGG"] * 21
        folds = stratified_kfold(labels, 4, seed=0)
        assert len(folds) == 4
        tests = np.sort(np.concatenate([test for _, test in folds]))
        assert np.array_equal(tests, np.arange(34))  # every index tested once
        for train, test in folds:
            assert len(np.intersect1d(train, test)) == 0
            assert np.array_equal(np.sort(np.concatenate([train, test])), np.arange(34))

    def test_stratification_within_one(self):
        labels = ["LGG"] * 13 + ["HGG"] * 21
        y = encode_labels(labels)
        for _, test in stratified_kfold(labels, 4, seed=2):
            hgg = int(y[test].sum())
            lgg = len(test) - hgg
            assert lgg in (3, 4)  # 13 dealt into 4 folds
            assert hgg in (5, 6)  # 21 dealt into 4 folds

    def test_deterministic_per_seed(self):
        labels = ["LGG"] * 9 + ["HGG"] * 11
        a = stratified_kfold(labels, 3, seed=7)
        b = stratified_kfold(labels, 3, seed=7)
        for (ta, sa), (tb, sb) in zip(a, b):
            assert np.array_equal(ta, tb) and np.array_equal(sa, sb)
        c = stratified_kfold(labels, 3, seed=8)
        assert any(not np.array_equal(sa, sc) for (_, sa), (_, sc) in zip(a, c))

    def test_too_few_samples_or_folds(self):
        with pytest.raises(InsufficientDataError):
            stratified_kfold(["LGG"] * 2 + ["HGG"] * 9, 3)
        with pytest.raises(OutOfRangeError):
            stratified_kfold(["LGG"] * 9 + ["HGG"] * 9, 1)


class TestRankAuc:
    def test_frozen_example(self):
        # Sorted scores rank the positives 2nd and 4th: U = 6 - 3 = 3 of 4.
        auc = rank_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8])
        assert auc == 0.75

    def test_perfect(self):
        assert rank_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0

    def test_reversed(self):
        assert rank_auc([0, 0, 1, 1], [0.9, 0.8, 0.2, 0.1]) == 0.0

    def test_all_ties(self):
        assert rank_auc([0, 1, 0, 1, 1], [0.5] * 5) == 0.5

    def test_partial_tie(self):
        # one concordant pair, one tied pair: (1 + 0.5) / 2
        assert rank_auc([0, 0, 1, 1], [0.3, 0.5, 0.5, 0.9]) == pytest.approx(0.875)

    def test_single_class(self):
        with pytest.raises(UndefinedMetricError):
            rank_auc([1, 1, 1], [0.1, 0.2, 0.3])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            y = rng.integers(0, 2, size=30)
            if len(np.unique(y)) < 2:
                continue
            s = rng.random(30)
            a = rank_auc(y, s)
            assert rank_auc(y, s**3) == pytest.approx(a)
            assert rank_auc(y, 0.1 + 0.8 * s) == pytest.approx(a)


class TestComputeMetrics:
    def test_perfect_predictions(self):
        y = np.array([0, 0, 1, 1, 1])
        r = compute_metrics(y, y, np.array([0.1, 0.2, 0.9, 0.8, 0.7]))
        assert r.accuracy == r.precision == r.recall == r.f1 == 1.0
        assert r.auc == 1.0
        assert np.array_equal(r.confusion, [[2, 0], [0, 3]])

    def test_confusion_layout(self):
        y_true = [0, 0, 1, 1]
        y_pred = [0, 1, 0, 1]
        m = confusion_matrix(y_true, y_pred)
        assert np.array_equal(m, [[1, 1], [1, 1]])
        r = compute_metrics(y_true, y_pred, [0.2, 0.6, 0.4, 0.8])
        assert int(r.confusion.sum()) == r.n_test == 4

    def test_weighted_recall_equals_accuracy(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            n = int(rng.integers(5, 40))
            y = rng.integers(0, 2, size=n)
            p = rng.integers(0, 2, size=n)
            s = rng.random(n)
            r = compute_metrics(y, p, s)
            assert r.recall == pytest.approx(r.accuracy, abs=1e-12)

    def test_single_class_truth_sets_auc_none(self):
        r = compute_metrics([1, 1, 1], [1, 0, 1], [0.9, 0.4, 0.8])
        assert r.auc is None
        assert r.accuracy == pytest.approx(2 / 3)
        assert r.recall == pytest.approx(2 / 3)

    def test_zero_division_precision(self):
        # nothing predicted LGG: its precision contributes 0, not NaN
        r = compute_metrics([0, 0, 1, 1], [1, 1, 1, 1], [0.6, 0.7, 0.8, 0.9])
        assert r.per_class_precision[0] == 0.0
        assert r.precision == pytest.approx(0.5 * 0.5)
        assert np.isfinite(r.f1)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        y = rng.integers(0, 2, size=25)
        y[0], y[1] = 0, 1
        p = rng.integers(0, 2, size=25)
        s = rng.random(25)
        r1 = compute_metrics(y, p, s)
        perm = rng.permutation(25)
        r2 = compute_metrics(y[perm], p[perm], s[perm])
        assert r1.accuracy == r2.accuracy
        assert r1.precision == pytest.approx(r2.precision)
        assert r1.f1 == pytest.approx(r2.f1)
        assert r1.auc == pytest.approx(r2.auc)

    def test_validation(self):
        with pytest.raises(ShapeError):
            compute_metrics([0, 1], [0], [0.5])
        with pytest.raises(OutOfRangeError):
            compute_metrics([0, 2], [0, 1], [0.5, 0.5])
        with pytest.raises(OutOfRangeError):
            compute_metrics([0, 1], [0, 1], [0.5, 1.5])

    def test_metrics_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            y = rng.integers(0, 2, size=20)
            y[:2] = [0, 1]
            p = rng.integers(0, 2, size=20)
            s = rng.random(20)
            r = compute_metrics(y, p, s)
            for v in (r.accuracy, r.precision, r.recall, r.f1, r.auc):
                assert 0.0 <= v <= 1.0


class TestReportOutput:
    def _report(self) -> EvalReport:
        y = [0, 0, 1, 1, 1]
        p = [0, 1, 1, 1, 0]
        s = [0.2, 0.6, 0.9, 0.7, 0.3]
        return compute_metrics(y, p, s, seed=4, feature_set="B1+B2, 200 features")

    def test_text_lines(self):
        lines = report_lines(self._report())
        text = "\n".join(lines)
        assert "B1+B2, 200 features" in text
        assert "accuracy" in text
        assert "confusion" in text

    def test_flat_file(self, tmp_path):
        r = self._report()
        path = tmp_path / "report.txt"
        write_report(r, path)
        entries = dict(
            line.split(" = ", 1) for line in path.read_text().splitlines()
        )
        assert float(entries["accuracy"]) == r.accuracy
        assert float(entries["auc"]) == r.auc
        assert int(entries["confusion_true_hgg_pred_hgg"]) == int(r.confusion[1, 1])
        assert entries["feature_set"] == "B1+B2, 200 features"

    def test_flat_file_undefined_auc(self, tmp_path):
        r = compute_metrics([1, 1, 1, 1, 1], [1, 1, 0, 1, 1], [0.9, 0.8, 0.4, 0.7, 0.6])
        path = tmp_path / "report.txt"
        write_report(r, path)
        assert "auc = undefined" in path.read_text()

    def test_confusion_csv(self, tmp_path):
        r = self._report()
        path = tmp_path / "confusion.csv"
        write_confusion_csv(r, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "true_class,pred_LGG,pred_HGG"
        assert lines[1].startswith("LGG,")
        assert lines[2].startswith("HGG,")
        total = sum(int(x) for line in lines[1:] for x in line.split(",")[1:])
        assert total == r.n_test
