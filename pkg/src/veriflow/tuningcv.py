"""Leave-one-debate-out cross-validation and hyperparameter grid search.

Fold metrics are pooled: every fold's held-out predictions go into one
confusion matrix, which is stable for tiny folds; per-fold bundles are also
returned for reporting.  Grid search selects the candidate with the highest
pooled MAR, breaking ties by smaller l2 and then by declaration order.

Folds and grid points are pure functions of their inputs, so they may be
evaluated in parallel; the worker count is capped by the VERIFLOW_THREADS
environment variable (default 1, sequential).
"""

from __future__ import annotations

import io
import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import Dataset, FoldSpec, Label
from .errors import ConfigError, TrainingError
from .evalkit import MetricsBundle, evaluate_predictions


def worker_count() -> int:
    raw = os.environ.get("VERIFLOW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"VERIFLOW_THREADS must be an integer, got {raw!r}") from None


def parallel_map(fn, items: list):
    """Map preserving input order; parallel when VERIFLOW_THREADS > 1."""
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class CVResult:
    pooled: MetricsBundle
    per_fold: list[tuple[str, MetricsBundle]]  # (held_out_debate_id, bundle)
    predictions: dict[str, Label]  # claim_id -> predicted label (union over folds)


def cv_evaluate(model_spec, dataset: Dataset, folds: FoldSpec) -> CVResult:
    """Train per fold on the train side, predict the held-out side, pool."""
    if len(folds) < 2:
        raise ConfigError("cross-validation needs at least 2 folds")

    def run_fold(fold):
        try:
            fitted = model_spec.fit(dataset, list(fold.train_claim_ids))
            preds = fitted.predict(dataset, list(fold.heldout_claim_ids))
        except Exception as e:
            raise TrainingError(f"fold {fold.held_out_debate_id!r} failed: {e}") from e
        return fold, preds

    results = parallel_map(run_fold, list(folds))

    y_true_all: list[Label] = []
    y_pred_all: list[Label] = []
    per_fold = []
    predictions: dict[str, Label] = {}
    for fold, preds in results:
        truth = dataset.labels(list(fold.heldout_claim_ids))
        per_fold.append((fold.held_out_debate_id, evaluate_predictions(truth, preds)))
        y_true_all.extend(truth)
        y_pred_all.extend(preds)
        predictions.update(zip(fold.heldout_claim_ids, preds))
    return CVResult(pooled=evaluate_predictions(y_true_all, y_pred_all), per_fold=per_fold, predictions=predictions)


@dataclass
class GridSpec:
    """Named hyperparameter -> candidate values; order is declaration order."""

    params: dict[str, list]

    def __post_init__(self):
        if not self.params or any(len(v) == 0 for v in self.params.values()):
            raise ConfigError("grid must have at least one candidate per parameter")

    def candidates(self) -> list[dict]:
        names = list(self.params)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.params[n] for n in names))]


@dataclass
class GridResult:
    best: dict
    best_bundle: MetricsBundle
    leaderboard: list[tuple[dict, MetricsBundle, bool]]  # (candidate, pooled bundle, selected)


def grid_search(grid: GridSpec, model_spec, dataset: Dataset, folds: FoldSpec) -> GridResult:
    """Evaluate every candidate by pooled LODO CV and pick the best MAR."""
    candidates = grid.candidates()

    def evaluate(cand: dict) -> MetricsBundle:
        return cv_evaluate(model_spec.with_params(**cand), dataset, folds).pooled

    bundles = parallel_map(evaluate, candidates)

    def sort_key(i: int):
        # max MAR; ties -> smaller l2 if present, then declaration order
        cand = candidates[i]
        return (-bundles[i].mar, cand.get("l2", 0.0), i)

    best_i = min(range(len(candidates)), key=sort_key)
    leaderboard = [(candidates[i], bundles[i], i == best_i) for i in range(len(candidates))]
    return GridResult(best=candidates[best_i], best_bundle=bundles[best_i], leaderboard=leaderboard)


def leaderboard_csv(result: GridResult) -> str:
    """CSV "candidate,mae,mmae,acc,f1,mar,selected" in declaration order."""
    out = io.StringIO()
    out.write("candidate,mae,mmae,acc,f1,mar,selected\n")
    for cand, b, selected in result.leaderboard:
        desc = ";".join(f"{k}={v}" for k, v in cand.items())
        out.write(
            f"{desc},{b.mae:.4f},{b.mmae:.4f},{b.accuracy:.2f},{b.macro_f1:.2f},{b.mar:.2f},"
            f"{'yes' if selected else 'no'}\n"
        )
    return out.getvalue()
