import numpy as np
import pytest

from moocgrade.data import Dataset, SplitDataset
from moocgrade.evaluation import (
    StudentCategory,
    UndefinedCurveError,
    classification_report,
    confusion_matrix,
    per_category_report,
    roc_ovr,
    student_category,
)

from conftest import make_record


def mann_whitney_auc(scores, truth, positive):
    """Oracle: fraction of (positive, negative) pairs ranked correctly,
    ties counting one half."""
    pos = [s for s, t in zip(scores, truth) if t == positive]
    neg = [s for s, t in zip(scores, truth) if t != positive]
    total = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                total += 1.0
            elif a == b:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestConfusionMatrix:
    def test_perfect_is_diagonal(self):
        cm = confusion_matrix([0, 1, 2, 3, 4], [0, 1, 2, 3, 4])
        assert np.array_equal(cm, np.eye(5, dtype=int))

    def test_direct_counts(self):
        cm = confusion_matrix([0, 0, 1], [0, 1, 1])
        assert cm[0, 0] == 1 and cm[0, 1] == 1 and cm[1, 1] == 1
        assert cm.sum() == 3

    def test_row_sums_are_supports(self, rng):
        truth = rng.integers(0, 5, 100)
        pred = rng.integers(0, 5, 100)
        cm = confusion_matrix(truth, pred)
        assert np.array_equal(cm.sum(axis=1), np.bincount(truth,
                                                          minlength=5))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion_matrix([0, 1], [0])


class TestClassificationReport:
    def test_perfect(self):
        cm = confusion_matrix([0, 1, 2, 3, 4] * 2, [0, 1, 2, 3, 4] * 2)
        rep = classification_report(cm)
        assert rep.accuracy == 1.0
        for m in rep.per_class:
            assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)
        assert rep.macro_avg == (1.0, 1.0, 1.0)
        assert rep.weighted_avg == (1.0, 1.0, 1.0)

    def test_hand_computed_class(self):
        # class 0: TP=8, FP=2, FN=5
        cm = np.zeros((5, 5), dtype=int)
        cm[0, 0] = 8
        cm[1, 0] = 2
        cm[0, 1] = 5
        cm[1, 1] = 10
        rep = classification_report(cm)
        m = rep.per_class[0]
        assert m.precision == 8 / 10
        assert m.recall == 8 / 13
        assert m.f1 == pytest.approx(0.6956521739130435, abs=1e-12)
        assert m.support == 13

    def test_absent_class_zero_metrics(self):
        cm = confusion_matrix([0, 0, 1], [0, 0, 1])
        m = classification_report(cm).per_class[3]
        assert (m.precision, m.recall, m.f1, m.support) == (0.0, 0.0, 0.0, 0)

    def test_accuracy_is_trace_over_total(self, rng):
        truth = rng.integers(0, 5, 200)
        pred = rng.integers(0, 5, 200)
        cm = confusion_matrix(truth, pred)
        rep = classification_report(cm)
        assert rep.accuracy == np.trace(cm) / cm.sum()

    def test_weighted_f1_between_min_and_max(self, rng):
        for _ in range(10):
            truth = rng.integers(0, 5, 100)
            pred = rng.integers(0, 5, 100)
            rep = classification_report(confusion_matrix(truth, pred))
            f1s = [m.f1 for m in rep.per_class if m.support > 0]
            assert min(f1s) - 1e-12 <= rep.weighted_avg[2] <= \
                max(f1s) + 1e-12

    def test_supports_sum_to_total(self, rng):
        truth = rng.integers(0, 5, 50)
        pred = rng.integers(0, 5, 50)
        rep = classification_report(confusion_matrix(truth, pred))
        assert sum(m.support for m in rep.per_class) == 50


class TestRoc:
    def test_perfect_separation(self):
        scores = np.array([0.9, 0.8, 0.2, 0.1])
        truth = np.array([1, 1, 0, 0])
        curve = roc_ovr(scores, truth, 1)
        assert curve.auc == 1.0
        assert curve.points[0] == (0.0, 0.0)
        assert curve.points[-1] == (1.0, 1.0)

    def test_reversed_scores(self):
        scores = np.array([0.1, 0.2, 0.8, 0.9])
        truth = np.array([1, 1, 0, 0])
        assert roc_ovr(scores, truth, 1).auc == 0.0

    def test_fixture_auc_075(self):
        # positives {0.9, 0.4}, negatives {0.5, 0.1}: 3 of 4 pairs ordered
        scores = np.array([0.9, 0.4, 0.5, 0.1])
        truth = np.array([1, 1, 0, 0])
        curve = roc_ovr(scores, truth, 1)
        assert curve.auc == pytest.approx(0.75, abs=1e-12)
        assert curve.auc == pytest.approx(
            mann_whitney_auc(scores, truth, 1), abs=1e-12)

    def test_matches_mann_whitney_with_ties(self, rng):
        for _ in range(50):
            n = int(rng.integers(5, 200))
            scores = rng.choice([0.1, 0.3, 0.5, 0.7, 0.9], size=n)
            truth = rng.integers(0, 2, n)
            if truth.min() == truth.max():
                continue
            curve = roc_ovr(scores, truth, 1)
            assert curve.auc == pytest.approx(
                mann_whitney_auc(scores, truth, 1), abs=1e-9)

    def test_staircase_monotone(self, rng):
        scores = rng.random(100)
        truth = rng.integers(0, 2, 100)
        curve = roc_ovr(scores, truth, 1)
        xs = [p[0] for p in curve.points]
        ys = [p[1] for p in curve.points]
        assert xs[0] == 0.0 and ys[0] == 0.0
        assert xs[-1] == 1.0 and ys[-1] == 1.0
        assert all(b >= a for a, b in zip(xs, xs[1:]))
        assert all(b >= a for a, b in zip(ys, ys[1:]))

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedCurveError):
            roc_ovr(np.array([0.4, 0.6]), np.array([1, 1]), 1)

    def test_probability_matrix_input(self, rng):
        proba = rng.dirichlet(np.ones(5), size=40)
        truth = rng.integers(0, 5, 40)
        curve = roc_ovr(proba, truth, int(truth[0]))
        assert 0.0 <= curve.auc <= 1.0


class TestStudentCategory:
    def test_all_low_grades(self):
        assert student_category([0, 1, 0, 1]) == \
            StudentCategory.EXTREMELY_LOW

    def test_very_low_085(self):
        labels = [0] * 17 + [4] * 3   # r = 0.85
        assert student_category(labels) == StudentCategory.VERY_LOW

    def test_no_low_grades(self):
        assert student_category([2, 3, 4]) == StudentCategory.HIGH

    def test_boundary_ownership(self):
        # upper-inclusive: r = 0.9 belongs to very_low, not extremely_low
        assert student_category([0] * 9 + [4]) == StudentCategory.VERY_LOW
        assert student_category([0] * 8 + [4] * 2) == StudentCategory.LOW
        assert student_category([0] * 5 + [4] * 5) == StudentCategory.AVERAGE
        assert student_category([0] * 2 + [4] * 8) == StudentCategory.HIGH
        assert student_category([0] + [4] * 4) == StudentCategory.HIGH

    def test_partition(self):
        # every achievable fraction maps to exactly one category
        for k in range(0, 41):
            labels = [0] * k + [4] * (40 - k)
            assert isinstance(student_category(labels), StudentCategory)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            student_category([])


def three_student_split():
    """Hand fixture: categories and per-category weighted F1 are computed
    by hand below.

    student 1: train grades {0,0,1} -> r=1.0 -> extremely_low
    student 2: train grades {2,0}   -> r=0.5 -> average
    student 3: train grades {4,4}   -> r=0.0 -> high
    """
    def rec(u, c, t, score):
        return make_record(user_id=u, challenge_id=c, timestamp=t,
                           final_score=score)

    train = Dataset.from_records([
        rec(1, 10, 0, 5.0), rec(1, 11, 1, 15.0), rec(1, 12, 2, 25.0),
        rec(2, 10, 0, 45.0), rec(2, 13, 1, 10.0),
        rec(3, 11, 0, 85.0), rec(3, 12, 1, 95.0),
    ])
    test = Dataset.from_records([
        rec(1, 14, 3, 10.0),   # true class 0
        rec(1, 15, 4, 30.0),   # true class 1
        rec(2, 15, 2, 55.0),   # true class 2
        rec(3, 14, 2, 90.0),   # true class 4
    ])
    return SplitDataset(train=train, test=test)


class TestPerCategoryReport:
    def test_hand_fixture(self):
        split = three_student_split()
        # student 1 gets one right (class 0) and one wrong (1 -> 0);
        # students 2 and 3 predicted correctly
        preds = [0, 0, 2, 4]
        out = per_category_report(split, preds)
        assert set(out) == {StudentCategory.EXTREMELY_LOW,
                            StudentCategory.AVERAGE, StudentCategory.HIGH}
        # extremely_low: truth [0,1], pred [0,0]:
        # class0 p=1/2 r=1 f1=2/3; class1 p=0 r=0 f1=0
        # weighted F1 = (2/3)*1/2 + 0*1/2 = 1/3
        assert out[StudentCategory.EXTREMELY_LOW].weighted_f1 == \
            pytest.approx(1 / 3, abs=1e-12)
        assert out[StudentCategory.EXTREMELY_LOW].test_examples == 2
        assert out[StudentCategory.AVERAGE].weighted_f1 == 1.0
        assert out[StudentCategory.HIGH].weighted_f1 == 1.0

    def test_perfect_predictions(self):
        split = three_student_split()
        preds = [0, 1, 2, 4]
        out = per_category_report(split, preds)
        for rep in out.values():
            assert rep.weighted_f1 == 1.0

    def test_each_student_in_exactly_one_group(self):
        split = three_student_split()
        out = per_category_report(split, [0, 1, 2, 4])
        assert sum(rep.test_examples for rep in out.values()) == \
            len(split.test)
        assert sum(rep.students for rep in out.values()) == 3

    def test_prediction_length_mismatch(self):
        split = three_student_split()
        with pytest.raises(ValueError):
            per_category_report(split, [0, 1])
