"""Multi-input feed-forward fusion network trained from scratch.

One 16-unit fully connected ReLU layer per feature view, concatenation, one
32-unit ReLU layer, then a 3-way softmax.  Training is plain per-example
stochastic gradient descent (batch size configurable), weighted cross-entropy
with per-class sample weights, inverted dropout on both hidden stages, and a
fixed epoch budget with no early stopping.  Initialization, epoch shuffling
and dropout masks are all drawn from one seeded generator, so two runs with
equal seeds produce bit-identical parameters and histories.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import ClassWeights, Label, N_CLASSES
from .errors import DataError, TrainingError
from .evalkit import MetricsBundle, evaluate_predictions


@dataclass(frozen=True)
class Hyper:
    """Training hyperparameters; defaults are the reference configuration."""

    per_view_hidden: int = 16
    fusion_hidden: int = 32
    epochs: int = 512
    learning_rate: float = 0.005
    momentum: float = 0.0
    dropout_retention: float = 0.5
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.dropout_retention <= 1.0:
            raise DataError("dropout retention must be in (0, 1]")
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise DataError("epochs/batch_size must be >= 1 and learning_rate > 0")

    def with_overrides(self, **kw) -> "Hyper":
        return replace(self, **kw)


@dataclass
class FusionNet:
    view_names: tuple[str, ...]
    view_dims: tuple[int, ...]
    Wv: list[np.ndarray]  # per view: (h1, dim_v)
    bv: list[np.ndarray]  # per view: (h1,)
    Wf: np.ndarray  # (h2, h1 * V)
    bf: np.ndarray  # (h2,)
    Wo: np.ndarray  # (3, h2)
    bo: np.ndarray  # (3,)

    @property
    def n_views(self) -> int:
        return len(self.view_names)

    def param_blocks(self) -> list[tuple[str, np.ndarray]]:
        blocks = []
        for i, name in enumerate(self.view_names):
            blocks.append((f"Wv[{name}]", self.Wv[i]))
            blocks.append((f"bv[{name}]", self.bv[i]))
        blocks += [("Wf", self.Wf), ("bf", self.bf), ("Wo", self.Wo), ("bo", self.bo)]
        return blocks

    def param_count(self) -> int:
        return sum(p.size for _, p in self.param_blocks())


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    train: MetricsBundle
    eval: MetricsBundle | None = None


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _init_params(view_names, view_dims, hyper: Hyper, rng: np.random.Generator) -> FusionNet:
    h1, h2 = hyper.per_view_hidden, hyper.fusion_hidden
    Wv = [_glorot(rng, h1, d) for d in view_dims]
    bv = [np.zeros(h1) for _ in view_dims]
    Wf = _glorot(rng, h2, h1 * len(view_dims))
    bf = np.zeros(h2)
    Wo = _glorot(rng, N_CLASSES, h2)
    bo = np.zeros(N_CLASSES)
    return FusionNet(tuple(view_names), tuple(int(d) for d in view_dims), Wv, bv, Wf, bf, Wo, bo)


def init_net(view_dims: list[int], hyper: Hyper, view_names: list[str] | None = None) -> FusionNet:
    """Fresh network: uniform fan-based weights, zero biases; seeded by hyper.seed."""
    if not view_dims:
        raise DataError("need at least one view")
    if any(d < 1 for d in view_dims):
        raise DataError("view dims must be >= 1")
    names = list(view_names) if view_names is not None else [f"view{i}" for i in range(len(view_dims))]
    if len(names) != len(view_dims):
        raise DataError("view_names/view_dims length mismatch")
    return _init_params(names, view_dims, hyper, np.random.default_rng(hyper.seed))


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_views(net: FusionNet, views: list[np.ndarray]) -> list[np.ndarray]:
    if len(views) != net.n_views:
        raise DataError(f"expected {net.n_views} views, got {len(views)}")
    out = []
    n = None
    for v, x in enumerate(views):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != net.view_dims[v]:
            raise DataError(f"view {net.view_names[v]!r}: dim {x.shape[1]} != {net.view_dims[v]}")
        if n is None:
            n = x.shape[0]
        elif x.shape[0] != n:
            raise DataError("views disagree on batch size")
        out.append(x)
    return out


def _forward(
    net: FusionNet,
    views: list[np.ndarray],
    train_mode: bool,
    rng: np.random.Generator | None,
    retention: float,
    keep_cache: bool,
):
    cache = {"z_v": [], "a_v": [], "m_v": []}
    acts = []
    for v, x in enumerate(views):
        z = x @ net.Wv[v].T + net.bv[v]
        a = np.maximum(z, 0.0)
        m = None
        if train_mode and retention < 1.0:
            m = (rng.random(a.shape) < retention) / retention
            a = a * m
        acts.append(a)
        if keep_cache:
            cache["z_v"].append(z)
            cache["a_v"].append(a)
            cache["m_v"].append(m)
    h = np.concatenate(acts, axis=1)
    zf = h @ net.Wf.T + net.bf
    af = np.maximum(zf, 0.0)
    mf = None
    if train_mode and retention < 1.0:
        mf = (rng.random(af.shape) < retention) / retention
        af = af * mf
    zo = af @ net.Wo.T + net.bo
    p = _softmax_rows(zo)
    if keep_cache:
        cache.update({"x": views, "h": h, "zf": zf, "af": af, "mf": mf, "p": p})
        return p, cache
    return p, None


def forward(
    net: FusionNet,
    views: list[np.ndarray],
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    retention: float = 0.5,
) -> np.ndarray:
    """Class probabilities for a batch (or single vectors) of view inputs.

    Eval mode (the default) is deterministic: no dropout, no rescaling, no
    generator consumption.  Train mode applies inverted dropout with the
    given retention to both hidden stages and requires an rng.  Single
    vectors in give a single 3-vector out.
    """
    single = views and np.asarray(views[0]).ndim == 1
    views = _check_views(net, views)
    if train_mode and retention < 1.0 and rng is None:
        raise DataError("train-mode forward with dropout needs an rng")
    p, _ = _forward(net, views, train_mode, rng, retention, keep_cache=False)
    return p[0] if single else p


def eval_with_mask(net: FusionNet, views: list[np.ndarray], active_mask: list[bool]) -> np.ndarray:
    """Eval-mode forward with inactive views replaced by zero vectors."""
    if len(active_mask) != net.n_views:
        raise DataError(f"mask length {len(active_mask)} != {net.n_views} views")
    single = views and np.asarray(views[0]).ndim == 1
    views = _check_views(net, views)
    masked = [x if keep else np.zeros_like(x) for x, keep in zip(views, active_mask)]
    p, _ = _forward(net, masked, False, None, 1.0, keep_cache=False)
    return p[0] if single else p


def loss_and_grads(
    net: FusionNet,
    views: list[np.ndarray],
    y: list[Label | int],
    weights: ClassWeights | None,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    retention: float = 1.0,
):
    """Weighted cross-entropy over the batch and gradients per parameter block.

    Batch loss = mean_i s_i * CE_i.  Returns (loss, grads) where grads mirrors
    net.param_blocks() order.
    """
    views = _check_views(net, views)
    Y = np.array([int(v) for v in y])
    n = len(Y)
    s = weights.per_example([Label(int(v)) for v in Y]) if weights is not None else np.ones(n)
    p, cache = _forward(net, views, train_mode, rng, retention, keep_cache=True)

    ce = -np.log(np.clip(p[np.arange(n), Y], 1e-300, None))
    loss = float((s * ce).mean())

    dzo = p.copy()
    dzo[np.arange(n), Y] -= 1.0
    dzo *= (s / n)[:, None]
    gWo = dzo.T @ cache["af"]
    gbo = dzo.sum(axis=0)

    daf = dzo @ net.Wo
    if cache["mf"] is not None:
        daf = daf * cache["mf"]
    dzf = daf * (cache["zf"] > 0.0)
    gWf = dzf.T @ cache["h"]
    gbf = dzf.sum(axis=0)

    dh = dzf @ net.Wf
    h1 = net.bv[0].shape[0]
    grads = []
    for v in range(net.n_views):
        da = dh[:, v * h1 : (v + 1) * h1]
        if cache["m_v"][v] is not None:
            da = da * cache["m_v"][v]
        dz = da * (cache["z_v"][v] > 0.0)
        gW = dz.T @ views[v]
        gb = dz.sum(axis=0)
        grads.append((f"Wv[{net.view_names[v]}]", gW))
        grads.append((f"bv[{net.view_names[v]}]", gb))
    grads += [("Wf", gWf), ("bf", gbf), ("Wo", gWo), ("bo", gbo)]
    return loss, grads


def train_net(
    views: list[np.ndarray],
    y: list[Label | int],
    weights: ClassWeights | None,
    hyper: Hyper,
    view_names: list[str] | None = None,
    eval_views: list[np.ndarray] | None = None,
    eval_y: list[Label | int] | None = None,
) -> tuple[FusionNet, TrainingHistory]:
    """Train a fresh network; records one history entry per epoch.

    The epoch loss is the weighted mean per-example loss over that epoch's
    updates; train (and optional eval) metrics are computed in eval mode
    after the epoch's updates.
    """
    if not views:
        raise DataError("need at least one view")
    views = [np.asarray(v, dtype=float) for v in views]
    n = views[0].shape[0]
    if n < 1:
        raise DataError("need at least one training example")
    Y = np.array([int(v) for v in y])
    if len(Y) != n:
        raise DataError("views and labels disagree on n")

    rng = np.random.default_rng(hyper.seed)
    names = list(view_names) if view_names is not None else [f"view{i}" for i in range(len(views))]
    net = _init_params(names, [v.shape[1] for v in views], hyper, rng)
    velocity = {name: np.zeros_like(p) for name, p in net.param_blocks()}
    params = dict(net.param_blocks())

    history = TrainingHistory()
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            batch_views = [v[idx] for v in views]
            loss, grads = loss_and_grads(
                net,
                batch_views,
                list(Y[idx]),
                weights,
                train_mode=True,
                rng=rng,
                retention=hyper.dropout_retention,
            )
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch} (lr too high or bad inputs)")
            loss_sum += loss * len(idx)
            for name, g in grads:
                if hyper.momentum > 0.0:
                    velocity[name] *= hyper.momentum
                    velocity[name] -= hyper.learning_rate * g
                    params[name] += velocity[name]
                else:
                    params[name] -= hyper.learning_rate * g

        train_pred = predict_net(net, views)
        record = EpochRecord(
            epoch=epoch,
            loss=loss_sum / n,
            train=evaluate_predictions(list(Y), train_pred),
            eval=(
                evaluate_predictions(list(eval_y), predict_net(net, eval_views))
                if eval_views is not None
                else None
            ),
        )
        history.records.append(record)
    return net, history


def predict_proba_net(net: FusionNet, views: list[np.ndarray]) -> np.ndarray:
    p, _ = _forward(net, _check_views(net, views), False, None, 1.0, keep_cache=False)
    return p


def predict_net(net: FusionNet, views: list[np.ndarray]) -> list[Label]:
    p = predict_proba_net(net, views)
    # argmax ties break toward the lowest ordinal class
    return [Label(int(i)) for i in np.argmax(p, axis=1)]


def check_gradients(
    net: FusionNet,
    views: list[np.ndarray],
    y: list[Label | int],
    weights: ClassWeights | None = None,
    step: float = 1e-5,
) -> float:
    """Max relative error between backprop and central finite differences.

    Dropout is disabled; intended for small nets (all dims <= 8).  The error
    is measured per parameter block as ||g_bp - g_fd||_inf / max(||g_fd||_inf,
    1e-8) and the max over blocks is returned.
    """
    views = _check_views(net, views)
    _, grads = loss_and_grads(net, views, y, weights, train_mode=False, retention=1.0)
    analytic = dict(grads)
    worst = 0.0
    for name, p in net.param_blocks():
        fd = np.zeros_like(p)
        flat = p.ravel()
        fd_flat = fd.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp, _ = loss_and_grads(net, views, y, weights, train_mode=False, retention=1.0)
            flat[i] = orig - step
            lm, _ = loss_and_grads(net, views, y, weights, train_mode=False, retention=1.0)
            flat[i] = orig
            fd_flat[i] = (lp - lm) / (2.0 * step)
        denom = max(np.abs(fd).max(), 1e-8)
        worst = max(worst, np.abs(analytic[name] - fd).max() / denom)
    return worst


# ---------------------------------------------------------------------------
# History export and serialization


def history_to_csv(history: TrainingHistory) -> str:
    """CSV "epoch,loss,mae,mmae,acc,f1,mar[,eval_*]" with fixed formatting."""
    has_eval = any(r.eval is not None for r in history.records)
    cols = ["epoch", "loss", "mae", "mmae", "acc", "f1", "mar"]
    if has_eval:
        cols += ["eval_mae", "eval_mmae", "eval_acc", "eval_f1", "eval_mar"]
    out = io.StringIO()
    out.write(",".join(cols) + "\n")

    def fmt(b: MetricsBundle) -> list[str]:
        return [f"{b.mae:.4f}", f"{b.mmae:.4f}", f"{b.accuracy:.2f}", f"{b.macro_f1:.2f}", f"{b.mar:.2f}"]

    for r in history.records:
        row = [str(r.epoch), f"{r.loss:.6f}"] + fmt(r.train)
        if has_eval:
            row += fmt(r.eval) if r.eval is not None else [""] * 5
        out.write(",".join(row) + "\n")
    return out.getvalue()


def save_net(path: str | Path, net: FusionNet) -> None:
    h1 = net.bv[0].shape[0]
    h2 = net.bf.shape[0]
    lines = [f"fusionnet {net.n_views} {h1} {h2}"]
    for v in range(net.n_views):
        lines.append(f"view {net.view_names[v]} {net.view_dims[v]}")
        for row in net.Wv[v]:
            lines.append(" ".join(repr(float(x)) for x in row))
        lines.append(" ".join(repr(float(x)) for x in net.bv[v]))
    for tag, W, b in (("fusion", net.Wf, net.bf), ("output", net.Wo, net.bo)):
        lines.append(tag)
        for row in W:
            lines.append(" ".join(repr(float(x)) for x in row))
        lines.append(" ".join(repr(float(x)) for x in b))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_net(path: str | Path) -> FusionNet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = lines[0].split()
    if len(head) != 4 or head[0] != "fusionnet":
        raise DataError(f"{path}: bad fusionnet header")
    n_views, h1, h2 = (int(x) for x in head[1:])
    pos = 1
    names, dims, Wv, bv = [], [], [], []
    for _ in range(n_views):
        tag, name, dim = lines[pos].split()
        if tag != "view":
            raise DataError(f"{path}: expected view block at line {pos + 1}")
        names.append(name)
        dims.append(int(dim))
        pos += 1
        Wv.append(np.array([[float(x) for x in lines[pos + r].split()] for r in range(h1)]))
        pos += h1
        bv.append(np.array([float(x) for x in lines[pos].split()]))
        pos += 1

    def block(tag: str, rows: int, p: int):
        if lines[p] != tag:
            raise DataError(f"{path}: expected {tag!r} block at line {p + 1}")
        p += 1
        W = np.array([[float(x) for x in lines[p + r].split()] for r in range(rows)])
        p += rows
        b = np.array([float(x) for x in lines[p].split()])
        return W, b, p + 1

    Wf, bf, pos = block("fusion", h2, pos)
    Wo, bo, pos = block("output", N_CLASSES, pos)
    return FusionNet(tuple(names), tuple(dims), Wv, bv, Wf, bf, Wo, bo)
