import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from veriflow.corpus import Label, synth_multiview
from veriflow.errors import DataError
from veriflow.evalkit import (
    ConfusionMatrix,
    confusion,
    evaluate_predictions,
    metrics,
    ngram_baseline,
    random_baseline,
)

# Published confusion matrix of the full fusion model (192 test claims) and
# the metric values reported alongside it; used as a fixed cross-check.
REFERENCE_CM = ((66, 12, 4), (16, 14, 9), (32, 21, 18))
TEST_DIST = (82, 39, 71)  # false / half-true / true
TRAIN_DIST = (48, 24, 22)


def brute_force_metrics(y_true, y_pred):
    """Independent per-example recomputation of all five measures."""
    n = len(y_true)
    mae = sum(abs(t - p) for t, p in zip(y_true, y_pred)) / n
    per_class_mae, recalls = [], []
    for c in range(3):
        members = [(t, p) for t, p in zip(y_true, y_pred) if t == c]
        if not members:
            continue
        per_class_mae.append(sum(abs(t - p) for t, p in members) / len(members))
        recalls.append(sum(1 for t, p in members if p == t) / len(members))
    mmae = sum(per_class_mae) / len(per_class_mae)
    acc = 100.0 * sum(1 for t, p in zip(y_true, y_pred) if t == p) / n
    mar = 100.0 * sum(recalls) / len(recalls)
    f1s = []
    for c in range(3):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        f1s.append(2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0)
    f1 = 100.0 * sum(f1s) / 3
    return mae, mmae, acc, f1, mar


class TestConfusion:
    def test_perfect_predictions_diagonal(self):
        y = [0, 1, 2, 1, 0, 2]
        cm = confusion(y, y)
        assert cm.counts == ((2, 0, 0), (0, 2, 0), (0, 0, 2))

    def test_single_pair(self):
        cm = confusion([Label.TRUE], [Label.FALSE])
        assert cm.counts[2][0] == 1
        assert cm.n == 1

    def test_all_false_on_test_distribution(self):
        y_true = [0] * 82 + [1] * 39 + [2] * 71
        cm = confusion(y_true, [0] * 192)
        assert cm.col_sums() == (192, 0, 0)
        assert [row[0] for row in cm.counts] == [82, 39, 71]

    def test_length_mismatch(self):
        with pytest.raises(DataError, match="length mismatch"):
            confusion([0, 1], [0])

    def test_row_sums_equal_true_counts(self):
        rng = np.random.default_rng(1)
        y_true = list(rng.integers(0, 3, size=50))
        y_pred = list(rng.integers(0, 3, size=50))
        cm = confusion(y_true, y_pred)
        assert cm.row_sums() == tuple((np.bincount(y_true, minlength=3)).tolist())


class TestMetrics:
    def test_reference_confusion_matrix(self):
        b = metrics(ConfusionMatrix(REFERENCE_CM))
        assert b.accuracy == pytest.approx(51.04, abs=0.01)
        assert b.macro_f1 == pytest.approx(45.07, abs=0.01)
        assert b.mar == pytest.approx(47.25, abs=0.01)
        assert b.mae == pytest.approx(0.6771, abs=0.0005)
        assert b.mmae == pytest.approx(0.6940, abs=0.0005)

    def test_diagonal_is_perfect(self):
        b = metrics(ConfusionMatrix(((5, 0, 0), (0, 7, 0), (0, 0, 3))))
        assert (b.mae, b.mmae) == (0.0, 0.0)
        assert (b.accuracy, b.macro_f1, b.mar) == (100.0, 100.0, 100.0)

    def test_all_false_on_test_distribution(self):
        y_true = [0] * 82 + [1] * 39 + [2] * 71
        b = evaluate_predictions(y_true, [0] * 192)
        assert b.accuracy == pytest.approx(100 * 82 / 192, abs=1e-9)
        assert b.mar == pytest.approx(100 / 3, abs=1e-9)
        assert b.mae == pytest.approx((39 * 1 + 71 * 2) / 192, abs=1e-9)

    def test_accuracy_times_n_is_trace(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(1, 60))
            y_true = list(rng.integers(0, 3, size=n))
            y_pred = list(rng.integers(0, 3, size=n))
            cm = confusion(y_true, y_pred)
            b = metrics(cm)
            assert b.accuracy * cm.n == pytest.approx(100.0 * cm.trace(), abs=1e-9)

    def test_mmae_equals_mae_on_balanced_truth(self):
        rng = np.random.default_rng(3)
        y_true = [0] * 20 + [1] * 20 + [2] * 20
        y_pred = list(rng.integers(0, 3, size=60))
        b = evaluate_predictions(y_true, y_pred)
        assert b.mmae == pytest.approx(b.mae, abs=1e-12)

    def test_mar_invariant_to_class_duplication(self):
        y_true = [0, 0, 1, 1, 2, 2]
        y_pred = [0, 1, 1, 1, 0, 2]
        base = evaluate_predictions(y_true, y_pred).mar
        # duplicate every class-0 example
        dup = evaluate_predictions(y_true + [0, 0], y_pred + [0, 1]).mar
        assert dup == pytest.approx(base, abs=1e-12)

    def test_empty_true_class_skipped(self):
        b = evaluate_predictions([0, 0, 2], [0, 1, 2])
        # classes present: 0 (mae 0.5) and 2 (mae 0)
        assert b.mmae == pytest.approx(0.25, abs=1e-12)

    def test_mae_bounds(self):
        b = evaluate_predictions([0, 0], [2, 2])
        assert b.mae == 2.0

    @given(
        st.lists(
            st.tuples(st.integers(0, 2), st.integers(0, 2)),
            min_size=1,
            max_size=10,
        )
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_brute_force_oracle(self, pairs):
        y_true = [t for t, _ in pairs]
        y_pred = [p for _, p in pairs]
        b = evaluate_predictions(y_true, y_pred)
        mae, mmae, acc, f1, mar = brute_force_metrics(y_true, y_pred)
        assert b.mae == pytest.approx(mae, abs=1e-12)
        assert b.mmae == pytest.approx(mmae, abs=1e-12)
        assert b.accuracy == pytest.approx(acc, abs=1e-12)
        assert b.macro_f1 == pytest.approx(f1, abs=1e-12)
        assert b.mar == pytest.approx(mar, abs=1e-12)


class TestRandomBaseline:
    def test_uniform_converges_to_one_third(self):
        y_true = [0] * 82 + [1] * 39 + [2] * 71
        b = random_baseline(TRAIN_DIST, y_true, mode="uniform", seed=0, n_trials=2000)
        assert b.accuracy == pytest.approx(33.33, abs=1.0)

    def test_train_stratified_near_analytic_expectation(self):
        # closed form: sum_c P(pred=c) * P(true=c)
        p = np.array(TRAIN_DIST) / sum(TRAIN_DIST)
        q = np.array(TEST_DIST) / sum(TEST_DIST)
        expected = 100.0 * float(p @ q)
        assert expected == pytest.approx(35.65, abs=0.01)
        y_true = [0] * 82 + [1] * 39 + [2] * 71
        b = random_baseline(TRAIN_DIST, y_true, mode="train_stratified", seed=1, n_trials=2000)
        assert b.accuracy == pytest.approx(expected, abs=1.0)

    def test_single_trial_reproducible(self):
        y_true = [0, 1, 2, 2, 0]
        a = random_baseline(TRAIN_DIST, y_true, mode="uniform", seed=42, n_trials=1)
        b = random_baseline(TRAIN_DIST, y_true, mode="uniform", seed=42, n_trials=1)
        assert a == b

    def test_invalid_mode(self):
        with pytest.raises(DataError, match="mode"):
            random_baseline(TRAIN_DIST, [0], mode="oracle", seed=0, n_trials=1)


@pytest.fixture(scope="module")
def text_signal_dataset():
    # views carry no signal; only the generated texts do
    return synth_multiview(240, 6, [("noise", 2, 0.0)], seed=13, test_fraction=0.34, text_signal=0.7)


class TestNgramBaseline:
    def test_beats_uniform_baseline_on_text_signal(self, text_signal_dataset):
        b = ngram_baseline(text_signal_dataset)
        assert b.accuracy > 40.0  # uniform baseline sits at 33.33

    def test_deterministic(self, text_signal_dataset):
        a = ngram_baseline(text_signal_dataset, seed=3)
        b = ngram_baseline(text_signal_dataset, seed=3)
        assert a == b

    def test_all_fields_populated(self, text_signal_dataset):
        b = ngram_baseline(text_signal_dataset)
        for value in b.as_dict().values():
            assert np.isfinite(value)
        assert b.cm is not None and b.cm.n == len(text_signal_dataset.split("test"))
