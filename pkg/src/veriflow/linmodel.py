"""Class-weighted multinomial logistic regression with L2, trained by
full-batch preconditioned gradient descent with backtracking line search.

Objective (convex):

    L(W, b) = sum_i s_i * CE_i / sum_i s_i + (l2 / 2) * ||W||_F^2

where CE_i = -log softmax(W x_i + b)[y_i] and s_i is the per-example sample
weight (class weight of y_i; mean 1 under the corpus normalization).  The
bias is not regularized.  Normalizing by the total sample weight makes the
argmin invariant to rescaling all weights by a constant.  Determinism: the
initial point is drawn from a seeded generator, and descent itself is exact
arithmetic, so equal seeds give bit-identical models.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ClassWeights, Label, N_CLASSES
from .errors import DataError, TrainingError


@dataclass(frozen=True)
class OptConfig:
    """Gradient descent settings: stop at grad_tol (inf-norm) or max_iter."""

    max_iter: int = 2000
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    init_scale: float = 0.01


@dataclass
class LinearModel:
    W: np.ndarray  # (3, d)
    b: np.ndarray  # (3,)
    l2: float

    @property
    def feature_dim(self) -> int:
        return self.W.shape[1]


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _loss_grad(
    W: np.ndarray,
    b: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    s: np.ndarray,
    l2: float,
    want_grad: bool = True,
):
    P = _softmax_rows(X @ W.T + b)
    total = s.sum()
    # clip avoids -inf on (numerically) zero probabilities at extreme params
    ce = -np.log(np.clip(P[np.arange(len(X)), Y], 1e-300, None))
    loss = float((s * ce).sum() / total + 0.5 * l2 * (W**2).sum())
    if not want_grad:
        return loss, None, None
    D = P.copy()
    D[np.arange(len(X)), Y] -= 1.0
    D *= (s / total)[:, None]
    gW = D.T @ X + l2 * W
    gb = D.sum(axis=0)
    return loss, gW, gb


def train_logreg(
    X: np.ndarray,
    y: list[Label | int],
    weights: ClassWeights | None,
    l2: float,
    opt_cfg: OptConfig = OptConfig(),
    seed: int = 0,
) -> LinearModel:
    """Minimize the weighted objective; deterministic given the seed.

    `weights` may be precomputed from the full train split, so the labels
    present in X need not cover all classes.  weights=None trains unweighted.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) < 1:
        raise DataError("X must be a non-empty (n, d) matrix")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite feature values")
    if l2 < 0:
        raise DataError("l2 must be >= 0")
    Y = np.array([int(v) for v in y])
    if len(Y) != len(X):
        raise DataError("X and y length mismatch")
    s = weights.per_example([Label(int(v)) for v in Y]) if weights is not None else np.ones(len(Y))

    rng = np.random.default_rng(seed)
    d = X.shape[1]
    W = rng.normal(0.0, opt_cfg.init_scale, size=(N_CLASSES, d))
    b = np.zeros(N_CLASSES)

    # The W block sees curvature ~ (1 + l2) while the unregularized bias sees
    # O(1); preconditioning W's step by 1/(1+l2) keeps one line search usable
    # across the whole l2 grid.
    precond = 1.0 / (1.0 + l2)
    loss, gW, gb = _loss_grad(W, b, X, Y, s, l2)
    step = 1.0
    for _ in range(opt_cfg.max_iter):
        gnorm = max(np.abs(gW).max(), np.abs(gb).max())
        if gnorm <= opt_cfg.grad_tol:
            break
        dW = precond * gW
        decrement = (gW * dW).sum() + (gb**2).sum()
        # backtracking line search with a mildly optimistic warm start
        t = min(step * 2.0, 1e6)
        while True:
            W_new = W - t * dW
            b_new = b - t * gb
            loss_new, _, _ = _loss_grad(W_new, b_new, X, Y, s, l2, want_grad=False)
            if loss_new <= loss - opt_cfg.armijo_c * t * decrement:
                break
            t *= opt_cfg.backtrack
            if t < 1e-20:
                raise TrainingError("line search failed: no descent direction")
        W, b = W_new, b_new
        step = t
        loss, gW, gb = _loss_grad(W, b, X, Y, s, l2)
        if not np.isfinite(loss):
            raise TrainingError("non-finite loss during logistic regression training")
    return LinearModel(W=W, b=b, l2=l2)


def loss_value(model: LinearModel, X: np.ndarray, y, weights: ClassWeights | None) -> float:
    Y = np.array([int(v) for v in y])
    s = weights.per_example([Label(int(v)) for v in Y]) if weights is not None else np.ones(len(Y))
    loss, _, _ = _loss_grad(model.W, model.b, np.asarray(X, dtype=float), Y, s, model.l2, want_grad=False)
    return loss


def gradient(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, y, weights: ClassWeights | None, l2: float
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient at (W, b); exposed for finite-difference checks."""
    Y = np.array([int(v) for v in y])
    s = weights.per_example([Label(int(v)) for v in Y]) if weights is not None else np.ones(len(Y))
    _, gW, gb = _loss_grad(W, b, np.asarray(X, dtype=float), Y, s, l2)
    return gW, gb


def predict_proba(model: LinearModel, x: np.ndarray) -> np.ndarray:
    """softmax(Wx + b) for one d-vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.feature_dim,):
        raise DataError(f"expected a {model.feature_dim}-vector, got shape {x.shape}")
    return _softmax_rows((model.W @ x + model.b)[None, :])[0]


def predict_proba_matrix(model: LinearModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.feature_dim:
        raise DataError(f"expected (n, {model.feature_dim}) matrix, got shape {X.shape}")
    return _softmax_rows(X @ model.W.T + model.b)


def argmax_label(probs: np.ndarray) -> Label:
    """Highest-probability class; exact ties go to the lowest ordinal class."""
    return Label(int(np.argmax(probs)))


def predict(model: LinearModel, x: np.ndarray) -> Label:
    return argmax_label(predict_proba(model, x))


# ---------------------------------------------------------------------------
# Serialization: flat text, dims header + row-major repr floats (bit-exact)


def save_linear(path: str | Path, model: LinearModel) -> None:
    lines = [f"linear {N_CLASSES} {model.feature_dim} {repr(model.l2)}"]
    lines.append(" ".join(repr(float(v)) for v in model.b))
    for row in model.W:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_linear(path: str | Path) -> LinearModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = lines[0].split()
    if len(head) != 4 or head[0] != "linear" or int(head[1]) != N_CLASSES:
        raise DataError(f"{path}: bad linear model header")
    d = int(head[2])
    l2 = float(head[3])
    b = np.array([float(v) for v in lines[1].split()])
    W = np.array([[float(v) for v in lines[2 + i].split()] for i in range(N_CLASSES)])
    if W.shape != (N_CLASSES, d) or b.shape != (N_CLASSES,):
        raise DataError(f"{path}: model dims do not match header")
    return LinearModel(W=W, b=b, l2=l2)
