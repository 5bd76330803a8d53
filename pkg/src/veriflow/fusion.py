"""Combination strategies: feature concatenation, probability averaging,
and a stacked ensemble with out-of-fold posterior recording.

Stacking protocol: every base model is trained once per leave-one-debate-out
fold to record honest posteriors for the held-out claims, the meta
classifier's L2 is tuned by another leave-one-debate-out CV over those
recorded posteriors (selection metric MAR), the bases are then retrained on
the full train split, and the meta classifier is trained on all recorded
posteriors with the selected L2.  At prediction time the final bases feed
the meta classifier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Dataset, FeatureView, FoldSpec, Label, N_CLASSES
from .errors import DataError, TrainingError
from .linmodel import argmax_label
from .pipeline import LRSpec, PosteriorSource
from .tuningcv import GridSpec, GridResult, grid_search, parallel_map


def concat_views(views: list[FeatureView]) -> FeatureView:
    """Concatenate views (fixed order) into one; requires identical coverage."""
    if not views:
        raise DataError("cannot concatenate zero views")
    ids = set(views[0].rows)
    for v in views[1:]:
        if set(v.rows) != ids:
            raise DataError(f"view {v.name!r} does not cover the same claims as {views[0].name!r}")
    dim = sum(v.dim for v in views)
    rows = {cid: np.concatenate([v.rows[cid] for v in views]) for cid in views[0].rows}
    return FeatureView(name="+".join(v.name for v in views), dim=dim, rows=rows)


def avg_probabilities(probs: list[np.ndarray]) -> np.ndarray:
    """Arithmetic mean of 3-class probability vectors."""
    if not probs:
        raise DataError("cannot average zero probability vectors")
    return np.mean(np.stack([np.asarray(p, dtype=float) for p in probs]), axis=0)


def avg_predict(probs: list[np.ndarray]) -> Label:
    return argmax_label(avg_probabilities(probs))


@dataclass
class StackedModel:
    base_specs: list
    bases: list  # fitted on the full train split
    meta: object  # FittedLR over concatenated base posteriors
    meta_l2: float
    meta_grid: GridResult
    oof_records: dict[str, list[np.ndarray]]  # claim_id -> per-base posteriors
    oof_fold: dict[str, str]  # claim_id -> held-out debate of the producing fold
    fold_train_ids: dict[str, tuple[str, ...]]  # held-out debate -> base training ids

    @property
    def n_bases(self) -> int:
        return len(self.base_specs)


def stack_train(base_specs: list, dataset: Dataset, folds: FoldSpec, meta_grid: list[float]) -> StackedModel:
    """Train the stacked ensemble; see the module docstring for the protocol."""
    if len(folds) < 2:
        raise DataError("stacking needs at least 2 folds")
    if not base_specs:
        raise DataError("stacking needs at least one base spec")

    oof_records: dict[str, list[np.ndarray]] = {}
    oof_fold: dict[str, str] = {}
    fold_train_ids: dict[str, tuple[str, ...]] = {}

    def run_fold(fold):
        train_ids = list(fold.train_claim_ids)
        held_ids = list(fold.heldout_claim_ids)
        try:
            fitted = [spec.fit(dataset, train_ids) for spec in base_specs]
            probas = [f.proba_matrix(dataset, held_ids) for f in fitted]
        except Exception as e:
            raise TrainingError(f"stacking fold {fold.held_out_debate_id!r} failed: {e}") from e
        return fold, probas

    for fold, probas in parallel_map(run_fold, list(folds)):
        fold_train_ids[fold.held_out_debate_id] = fold.train_claim_ids
        for j, cid in enumerate(fold.heldout_claim_ids):
            if cid in oof_records:
                raise TrainingError(f"claim {cid!r} recorded by two folds; folds do not partition")
            oof_records[cid] = [P[j] for P in probas]
            oof_fold[cid] = fold.held_out_debate_id

    posterior_rows = {cid: np.concatenate(ps) for cid, ps in oof_records.items()}
    weights = base_specs[0].weights if hasattr(base_specs[0], "weights") else None
    meta_spec = LRSpec(sources=[PosteriorSource(rows=posterior_rows)], weights=weights)
    grid_result = grid_search(GridSpec({"l2": list(meta_grid)}), meta_spec, dataset, folds)
    meta_l2 = grid_result.best["l2"]

    train_ids = sorted(oof_records)
    final_bases = [spec.fit(dataset, dataset.split_ids("train")) for spec in base_specs]
    meta = meta_spec.with_params(l2=meta_l2).fit(dataset, train_ids)

    return StackedModel(
        base_specs=base_specs,
        bases=final_bases,
        meta=meta,
        meta_l2=meta_l2,
        meta_grid=grid_result,
        oof_records=oof_records,
        oof_fold=oof_fold,
        fold_train_ids=fold_train_ids,
    )


def stack_posteriors(model: StackedModel, dataset: Dataset, claim_ids: list[str]) -> np.ndarray:
    """Concatenated final-base posteriors, the meta classifier's input."""
    parts = [base.proba_matrix(dataset, claim_ids) for base in model.bases]
    return np.concatenate(parts, axis=1)


def stack_predict_proba(model: StackedModel, dataset: Dataset, claim_ids: list[str]) -> np.ndarray:
    Z = stack_posteriors(model, dataset, claim_ids)
    if Z.shape[1] != N_CLASSES * model.n_bases:
        raise DataError("meta input dim mismatch")
    from .linmodel import predict_proba_matrix

    return predict_proba_matrix(model.meta.model, Z)


def stack_predict(model: StackedModel, dataset: Dataset, claim_ids: list[str]) -> list[Label]:
    return [argmax_label(p) for p in stack_predict_proba(model, dataset, claim_ids)]


def audit_no_leakage(model: StackedModel, dataset: Dataset) -> None:
    """Assert every OOF posterior came from a fold excluding that claim's debate.

    Raises TrainingError on any violation; passing is a no-op.
    """
    for cid, fold_debate in model.oof_fold.items():
        claim = dataset.claim(cid)
        train_ids = model.fold_train_ids[fold_debate]
        if claim.debate_id != fold_debate:
            raise TrainingError(f"claim {cid!r} recorded under fold {fold_debate!r} but belongs to {claim.debate_id!r}")
        if cid in train_ids:
            raise TrainingError(f"claim {cid!r} appears in its own fold's training side")
        for tid in train_ids:
            if dataset.claim(tid).debate_id == claim.debate_id:
                raise TrainingError(
                    f"fold {fold_debate!r} trained on claim {tid!r} from the held-out debate {claim.debate_id!r}"
                )


def oof_records_csv(model: StackedModel, base_names: list[str] | None = None) -> str:
    """CSV "claim_id,base,prob_false,prob_half,prob_true" for audit."""
    names = base_names or [f"base{i}" for i in range(model.n_bases)]
    lines = ["claim_id,base,prob_false,prob_half,prob_true"]
    for cid in sorted(model.oof_records):
        for name, p in zip(names, model.oof_records[cid]):
            lines.append(f"{cid},{name},{p[0]:.6f},{p[1]:.6f},{p[2]:.6f}")
    return "\n".join(lines) + "\n"
