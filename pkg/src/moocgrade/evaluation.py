"""Evaluation protocol: confusion matrices, per-class metrics, one-vs-rest
ROC/AUC, and student performance-category breakdowns."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset, N_GRADE_CLASSES, SplitDataset, discretize_grade


class UndefinedCurveError(ValueError):
    """ROC needs at least one positive and one negative example."""


def confusion_matrix(truth, pred, n_classes: int = N_GRADE_CLASSES
                     ) -> np.ndarray:
    """counts[t][p] = number of examples with true class t predicted p."""
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if len(truth) != len(pred):
        raise ValueError(f"length mismatch: {len(truth)} truth vs "
                         f"{len(pred)} predictions")
    if len(truth) == 0:
        raise ValueError("need at least one example")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    return cm


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    per_class: list[ClassMetrics]
    accuracy: float
    macro_avg: tuple[float, float, float]      # precision, recall, f1
    weighted_avg: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "per_class": {
                str(k): {"precision": m.precision, "recall": m.recall,
                         "f1": m.f1, "support": m.support}
                for k, m in enumerate(self.per_class)},
            "accuracy": self.accuracy,
            "macro_avg": {"precision": self.macro_avg[0],
                          "recall": self.macro_avg[1],
                          "f1": self.macro_avg[2]},
            "weighted_avg": {"precision": self.weighted_avg[0],
                             "recall": self.weighted_avg[1],
                             "f1": self.weighted_avg[2]},
        }


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def classification_report(cm: np.ndarray) -> ClassificationReport:
    """Precision/recall/F1 per class plus accuracy and macro/weighted
    averages; zero-denominator metrics are defined as 0."""
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total < 1:
        raise ValueError("empty confusion matrix")
    n_classes = cm.shape[0]
    per_class = []
    for k in range(n_classes):
        tp = int(cm[k, k])
        fp = int(cm[:, k].sum()) - tp
        fn = int(cm[k, :].sum()) - tp
        p = _safe_div(tp, tp + fp)
        r = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * p * r, p + r)
        per_class.append(ClassMetrics(precision=p, recall=r, f1=f1,
                                      support=tp + fn))
    supports = np.array([m.support for m in per_class], dtype=np.float64)
    ps = np.array([m.precision for m in per_class])
    rs = np.array([m.recall for m in per_class])
    f1s = np.array([m.f1 for m in per_class])
    weights = supports / total
    return ClassificationReport(
        per_class=per_class,
        accuracy=float(np.trace(cm)) / total,
        macro_avg=(float(ps.mean()), float(rs.mean()), float(f1s.mean())),
        weighted_avg=(float(ps @ weights), float(rs @ weights),
                      float(f1s @ weights)),
    )


@dataclass(frozen=True)
class RocCurve:
    points: list[tuple[float, float]]   # (fpr, tpr), staircase
    auc: float


def roc_ovr(scores, truth, positive_class: int) -> RocCurve:
    """One-vs-rest ROC: rank by predicted probability of positive_class,
    sweep thresholds over distinct scores descending (ties grouped), AUC by
    trapezoid."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    s = scores[:, positive_class] if scores.ndim == 2 else scores
    pos = truth == positive_class
    n_pos = int(pos.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedCurveError(
            f"class {positive_class} needs at least one positive and one "
            f"negative example")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos_sorted = pos[order].astype(np.int64)
    # group tied scores: thresholds at the last index of each tie block
    distinct = np.flatnonzero(np.diff(s_sorted) != 0)
    cut = np.concatenate([distinct, [len(s_sorted) - 1]])
    tp = np.cumsum(pos_sorted)[cut]
    fp = (cut + 1) - tp
    tpr = tp / n_pos
    fpr = fp / n_neg
    xs = np.concatenate([[0.0], fpr])
    ys = np.concatenate([[0.0], tpr])
    auc = float(np.sum((xs[1:] - xs[:-1]) * (ys[1:] + ys[:-1])) / 2.0)
    return RocCurve(points=list(zip(xs.tolist(), ys.tolist())), auc=auc)


class StudentCategory(Enum):
    EXTREMELY_LOW = "extremely_low"
    VERY_LOW = "very_low"
    LOW = "low"
    AVERAGE = "average"
    HIGH = "high"


def student_category(train_labels) -> StudentCategory:
    """Category from the fraction r of a student's training grades in
    classes {0, 1}: r > 0.9 extremely low, 0.8 < r <= 0.9 very low,
    0.5 < r <= 0.8 low, 0.2 < r <= 0.5 average, r <= 0.2 high."""
    labels = list(train_labels)
    if not labels:
        raise ValueError("need at least one training label")
    r = sum(1 for v in labels if v in (0, 1)) / len(labels)
    if r > 0.9:
        return StudentCategory.EXTREMELY_LOW
    if r > 0.8:
        return StudentCategory.VERY_LOW
    if r > 0.5:
        return StudentCategory.LOW
    if r > 0.2:
        return StudentCategory.AVERAGE
    return StudentCategory.HIGH


@dataclass(frozen=True)
class CategoryReport:
    weighted_f1: float
    test_examples: int
    students: int


def categorize_students(train: Dataset) -> dict[int, StudentCategory]:
    """Category per student from their training-set grade labels."""
    return {
        uid: student_category(
            [discretize_grade(train.records[i].final_score)
             for i in train.student_index[uid]])
        for uid in train.student_index
    }


def per_category_report(split: SplitDataset, predictions
                        ) -> dict[StudentCategory, CategoryReport]:
    """Weighted F1 on the test set, grouped by the student's category
    (computed from training labels only). Categories with no test examples
    are absent from the result."""
    predictions = np.asarray(predictions, dtype=np.int64)
    if len(predictions) != len(split.test):
        raise ValueError(
            f"got {len(predictions)} predictions for "
            f"{len(split.test)} test records")
    categories = categorize_students(split.train)
    groups: dict[StudentCategory, list[int]] = {}
    for i, rec in enumerate(split.test.records):
        cat = categories[rec.user_id]
        groups.setdefault(cat, []).append(i)
    out = {}
    for cat, idx in groups.items():
        truth = [discretize_grade(split.test.records[i].final_score)
                 for i in idx]
        cm = confusion_matrix(truth, predictions[idx])
        report = classification_report(cm)
        students = {split.test.records[i].user_id for i in idx}
        out[cat] = CategoryReport(weighted_f1=report.weighted_avg[2],
                                  test_examples=len(idx),
                                  students=len(students))
    return out
