"""Ordinal 3-class evaluation: MAE, MMAE, accuracy, macro-F1, MAR.

All metrics are derived from a 3x3 confusion matrix over the ordinal label
order (false, half-true, true).  MAE and MMAE use the absolute class-index
distance, so confusing neighbouring classes costs less than confusing the
extremes.  Accuracy, macro-F1 and MAR are reported as percentages in
[0, 100]; MAE and MMAE as plain non-negative reals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Label, N_CLASSES
from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Integer counts; rows = true label, columns = predicted label."""

    counts: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if len(self.counts) != N_CLASSES or any(len(r) != N_CLASSES for r in self.counts):
            raise DataError("confusion matrix must be 3x3")
        if any(x < 0 for row in self.counts for x in row):
            raise DataError("confusion matrix entries must be >= 0")

    @property
    def n(self) -> int:
        return sum(x for row in self.counts for x in row)

    def row_sums(self) -> tuple[int, int, int]:
        return tuple(sum(row) for row in self.counts)

    def col_sums(self) -> tuple[int, int, int]:
        return tuple(sum(self.counts[i][j] for i in range(N_CLASSES)) for j in range(N_CLASSES))

    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(N_CLASSES))

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=int)


@dataclass(frozen=True)
class MetricsBundle:
    """The five evaluation measures for one prediction set.

    mae/mmae are raw ordinal errors; accuracy/macro_f1/mar are percentages.
    The confusion matrix the bundle was computed from travels along when
    available (None for trial-averaged bundles).
    """

    mae: float
    mmae: float
    accuracy: float
    macro_f1: float
    mar: float
    cm: ConfusionMatrix | None = None

    def as_dict(self) -> dict[str, float]:
        return {
            "mae": self.mae,
            "mmae": self.mmae,
            "acc": self.accuracy,
            "f1": self.macro_f1,
            "mar": self.mar,
        }


def confusion(y_true: list[Label | int], y_pred: list[Label | int]) -> ConfusionMatrix:
    """Count (true, predicted) label pairs."""
    if len(y_true) != len(y_pred):
        raise DataError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if len(y_true) == 0:
        raise DataError("need at least one prediction")
    counts = [[0] * N_CLASSES for _ in range(N_CLASSES)]
    for t, p in zip(y_true, y_pred):
        counts[int(t)][int(p)] += 1
    return ConfusionMatrix(tuple(tuple(row) for row in counts))


def metrics(cm: ConfusionMatrix) -> MetricsBundle:
    """Compute all five measures from a confusion matrix.

    MMAE and MAR average per-class values over the true classes that actually
    occur (empty classes are skipped; they can arise in tiny CV folds).
    Macro-F1 averages over all three classes with the 0/0 -> 0 convention.
    """
    n = cm.n
    if n == 0:
        raise DataError("empty confusion matrix")
    c = cm.counts
    row_sums = cm.row_sums()
    col_sums = cm.col_sums()

    mae = sum(c[i][j] * abs(i - j) for i in range(N_CLASSES) for j in range(N_CLASSES)) / n

    per_class_mae = [
        sum(c[i][j] * abs(i - j) for j in range(N_CLASSES)) / row_sums[i]
        for i in range(N_CLASSES)
        if row_sums[i] > 0
    ]
    mmae = sum(per_class_mae) / len(per_class_mae)

    accuracy = 100.0 * cm.trace() / n

    recalls = [c[i][i] / row_sums[i] for i in range(N_CLASSES) if row_sums[i] > 0]
    mar = 100.0 * sum(recalls) / len(recalls)

    f1s = []
    for i in range(N_CLASSES):
        tp = c[i][i]
        denom = row_sums[i] + col_sums[i]  # == 2tp + fp + fn
        f1s.append(2.0 * tp / denom if denom > 0 else 0.0)
    macro_f1 = 100.0 * sum(f1s) / N_CLASSES

    return MetricsBundle(mae=mae, mmae=mmae, accuracy=accuracy, macro_f1=macro_f1, mar=mar, cm=cm)


def evaluate_predictions(y_true: list[Label | int], y_pred: list[Label | int]) -> MetricsBundle:
    return metrics(confusion(y_true, y_pred))


def random_baseline(
    train_dist: tuple[int, int, int],
    y_true: list[Label | int],
    mode: str = "train_stratified",
    seed: int = 0,
    n_trials: int = 1000,
) -> MetricsBundle:
    """Random predictor baseline, metric fields averaged over n_trials.

    mode "uniform" samples each prediction uniformly over the 3 classes;
    mode "train_stratified" samples from the training label distribution.
    The attached confusion matrix aggregates counts over all trials.
    """
    if n_trials < 1:
        raise DataError("n_trials must be >= 1")
    if mode == "uniform":
        p = np.full(N_CLASSES, 1.0 / N_CLASSES)
    elif mode == "train_stratified":
        total = sum(train_dist)
        if total == 0:
            raise DataError("empty train distribution")
        p = np.array(train_dist, dtype=float) / total
    else:
        raise DataError(f"unknown random baseline mode {mode!r}")

    rng = np.random.default_rng(seed)
    fields = np.zeros(5)
    agg = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    for _ in range(n_trials):
        y_pred = rng.choice(N_CLASSES, size=len(y_true), p=p)
        cm = confusion(y_true, list(y_pred))
        b = metrics(cm)
        fields += (b.mae, b.mmae, b.accuracy, b.macro_f1, b.mar)
        agg += cm.as_array()
    fields /= n_trials
    agg_cm = ConfusionMatrix(tuple(tuple(int(x) for x in row) for row in agg))
    return MetricsBundle(
        mae=fields[0], mmae=fields[1], accuracy=fields[2], macro_f1=fields[3], mar=fields[4], cm=agg_cm
    )


def ngram_baseline(dataset, l2: float = 1.0, seed: int = 0) -> MetricsBundle:
    """Unweighted LR over TF-IDF word n-grams, trained on train, scored on test.

    Kept here so reports can place a simple lexical baseline next to the
    fusion models without pulling in the experiment runner.
    """
    from .pipeline import LRSpec, TfidfSource

    train_ids = dataset.split_ids("train")
    test_ids = dataset.split_ids("test")
    if not train_ids or not test_ids:
        raise DataError("ngram baseline needs non-empty train and test splits")
    spec = LRSpec(sources=[TfidfSource()], l2=l2, weights=None, seed=seed)
    fitted = spec.fit(dataset, train_ids)
    y_pred = fitted.predict(dataset, test_ids)
    return evaluate_predictions(dataset.labels(test_ids), y_pred)
