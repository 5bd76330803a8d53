"""Multimodal claim-veracity experiment toolkit.

Trains and evaluates fusion models (class-weighted logistic regression, a
multi-input neural network, and three ensemble schemes) over per-claim
feature views, with ordinal 3-class metrics and leave-one-debate-out
cross-validation.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    Claim,
    ClassWeights,
    Dataset,
    FeatureView,
    Fold,
    FoldSpec,
    Label,
    class_weights,
    load_dataset,
    loo_debate_folds,
    synth_multiview,
    validate,
)
from .errors import ConfigError, DataError, TrainingError, VeriflowError  # noqa: F401
from .evalkit import ConfusionMatrix, MetricsBundle, confusion, metrics  # noqa: F401
