"""Fold-safe feature sources and trainable model specs.

Everything that depends on corpus statistics (TF-IDF vocabulary/idf, z-score
standardization) is (re)fitted from the claim ids passed to fit(), so
cross-validation code can hand each fold's train side to a spec and get a
predictor with no held-out leakage by construction.

Feature sources:
  StoredViewSource   rows from a dataset FeatureView, z-scored by default
  TfidfSource        word 1-4-gram TF-IDF computed from claim texts
  LexiconSpeakerSource  lexicon proportions + speaker one-hot (stateless)

Model specs (fit(dataset, claim_ids) -> fitted predictor):
  LRSpec             logistic regression over the concatenated sources
  FusionNetSpec      the multi-input fusion network, one source per input
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import linmodel, neurofusion, textfeat
from .corpus import ClassWeights, Dataset, Label
from .errors import DataError


@dataclass
class Standardizer:
    """Per-dimension z-score transform; constant dimensions pass through."""

    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def fit(X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 0.0, std, 1.0)
        return Standardizer(mean=mean, std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


class FittedSource:
    """A feature source bound to one training fold."""

    name: str
    dim: int

    def matrix(self, dataset: Dataset, claim_ids: list[str]) -> np.ndarray:
        raise NotImplementedError


@dataclass
class StoredViewSource:
    """Features read from a named dataset view, optionally standardized."""

    view_name: str
    standardize: bool = True

    @property
    def name(self) -> str:
        return self.view_name

    def fit(self, dataset: Dataset, claim_ids: list[str]) -> "FittedStoredView":
        view = dataset.view(self.view_name)
        scaler = Standardizer.fit(view.matrix(claim_ids)) if self.standardize else None
        return FittedStoredView(self.view_name, view.dim, scaler)


@dataclass
class FittedStoredView(FittedSource):
    name: str
    dim: int
    scaler: Standardizer | None

    def matrix(self, dataset: Dataset, claim_ids: list[str]) -> np.ndarray:
        X = dataset.view(self.name).matrix(claim_ids)
        return self.scaler.transform(X) if self.scaler is not None else X


@dataclass
class TfidfSource:
    """TF-IDF 1-4-grams computed from claim texts; vocabulary fit per fold."""

    name: str = "tfidf"

    def fit(self, dataset: Dataset, claim_ids: list[str]) -> "FittedTfidf":
        model = textfeat.fit_tfidf(dataset.texts(claim_ids))
        return FittedTfidf(self.name, model.dim, model)


@dataclass
class FittedTfidf(FittedSource):
    name: str
    dim: int
    model: textfeat.TfidfModel

    def matrix(self, dataset: Dataset, claim_ids: list[str]) -> np.ndarray:
        return np.stack([textfeat.tfidf_vector(self.model, t) for t in dataset.texts(claim_ids)])


@dataclass
class LexiconSpeakerSource:
    """Lexicon category proportions concatenated with the speaker one-hot."""

    lexicon: textfeat.Lexicon
    name: str = "liwc_speaker"

    def fit(self, dataset: Dataset, claim_ids: list[str]) -> "FittedLexiconSpeaker":
        enc = textfeat.SpeakerEncoder(tuple(dataset.roster))
        return FittedLexiconSpeaker(self.name, self.lexicon.dim + enc.dim, self.lexicon, enc)


@dataclass
class FittedLexiconSpeaker(FittedSource):
    name: str
    dim: int
    lexicon: textfeat.Lexicon
    encoder: textfeat.SpeakerEncoder

    def matrix(self, dataset: Dataset, claim_ids: list[str]) -> np.ndarray:
        return np.stack(
            [textfeat.liwc_speaker_view(self.lexicon, self.encoder, dataset.claim(c)) for c in claim_ids]
        )


@dataclass
class PosteriorSource:
    """A fixed claim_id -> vector table (used for stacked meta features)."""

    rows: dict[str, np.ndarray]
    name: str = "posteriors"

    def fit(self, dataset: Dataset, claim_ids: list[str]) -> "FittedPosterior":
        dims = {v.shape[0] for v in self.rows.values()}
        if len(dims) != 1:
            raise DataError("posterior rows disagree on dimension")
        return FittedPosterior(self.name, dims.pop(), self.rows)


@dataclass
class FittedPosterior(FittedSource):
    name: str
    dim: int
    rows: dict[str, np.ndarray]

    def matrix(self, dataset: Dataset, claim_ids: list[str]) -> np.ndarray:
        try:
            return np.stack([self.rows[c] for c in claim_ids])
        except KeyError as e:
            raise DataError(f"no posterior row for claim {e.args[0]!r}") from None


# ---------------------------------------------------------------------------
# Model specs


@dataclass
class LRSpec:
    """Logistic regression over the concatenation of the fitted sources."""

    sources: list
    l2: float = 1.0
    weights: ClassWeights | None = None
    seed: int = 0
    opt: linmodel.OptConfig = field(default_factory=linmodel.OptConfig)

    def with_params(self, **kw) -> "LRSpec":
        return replace(self, **kw)

    def fit(self, dataset: Dataset, claim_ids: list[str]) -> "FittedLR":
        fitted = [s.fit(dataset, claim_ids) for s in self.sources]
        X = np.concatenate([f.matrix(dataset, claim_ids) for f in fitted], axis=1)
        model = linmodel.train_logreg(
            X, dataset.labels(claim_ids), self.weights, self.l2, self.opt, seed=self.seed
        )
        return FittedLR(fitted, model)


@dataclass
class FittedLR:
    sources: list
    model: linmodel.LinearModel

    def features(self, dataset: Dataset, claim_ids: list[str]) -> np.ndarray:
        return np.concatenate([f.matrix(dataset, claim_ids) for f in self.sources], axis=1)

    def proba_matrix(self, dataset: Dataset, claim_ids: list[str]) -> np.ndarray:
        return linmodel.predict_proba_matrix(self.model, self.features(dataset, claim_ids))

    def predict(self, dataset: Dataset, claim_ids: list[str]) -> list[Label]:
        P = self.proba_matrix(dataset, claim_ids)
        return [linmodel.argmax_label(p) for p in P]


@dataclass
class FusionNetSpec:
    """Multi-input fusion network; one fitted source per network input."""

    sources: list
    hyper: neurofusion.Hyper = field(default_factory=neurofusion.Hyper)
    weights: ClassWeights | None = None

    def with_params(self, **kw) -> "FusionNetSpec":
        hyper_kw = {k: v for k, v in kw.items() if hasattr(self.hyper, k)}
        rest = {k: v for k, v in kw.items() if k not in hyper_kw}
        spec = replace(self, **rest) if rest else self
        return replace(spec, hyper=self.hyper.with_overrides(**hyper_kw)) if hyper_kw else spec

    def fit(self, dataset: Dataset, claim_ids: list[str], eval_ids: list[str] | None = None) -> "FittedFusionNet":
        fitted = [s.fit(dataset, claim_ids) for s in self.sources]
        views = [f.matrix(dataset, claim_ids) for f in fitted]
        eval_views = [f.matrix(dataset, eval_ids) for f in fitted] if eval_ids else None
        net, history = neurofusion.train_net(
            views,
            dataset.labels(claim_ids),
            self.weights,
            self.hyper,
            view_names=[f.name for f in fitted],
            eval_views=eval_views,
            eval_y=dataset.labels(eval_ids) if eval_ids else None,
        )
        return FittedFusionNet(fitted, net, history)


@dataclass
class FittedFusionNet:
    sources: list
    net: neurofusion.FusionNet
    history: neurofusion.TrainingHistory

    def views(self, dataset: Dataset, claim_ids: list[str]) -> list[np.ndarray]:
        return [f.matrix(dataset, claim_ids) for f in self.sources]

    def proba_matrix(
        self, dataset: Dataset, claim_ids: list[str], active_mask: list[bool] | None = None
    ) -> np.ndarray:
        views = self.views(dataset, claim_ids)
        if active_mask is None:
            return neurofusion.predict_proba_net(self.net, views)
        return neurofusion.eval_with_mask(self.net, views, active_mask)

    def predict(
        self, dataset: Dataset, claim_ids: list[str], active_mask: list[bool] | None = None
    ) -> list[Label]:
        P = self.proba_matrix(dataset, claim_ids, active_mask)
        return [linmodel.argmax_label(p) for p in P]
