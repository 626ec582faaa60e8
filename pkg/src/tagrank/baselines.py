"""Non-deep baselines: distance-weighted kNN tag transfer and one-vs-all
linear SVMs trained by subgradient descent on the primal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _textio
from .core import Dataset, ValidationError

SVM_FORMAT = "tagrank-svm"


@dataclass(frozen=True)
class KnnConfig:
    k: int = 50
    sigma: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")


def _neighbors(d2: np.ndarray, k: int) -> np.ndarray:
    # k smallest distances, ordered by (distance, index)
    kth = np.partition(d2, k - 1)[k - 1]
    cand = np.flatnonzero(d2 <= kth)
    return cand[np.lexsort((cand, d2[cand]))][:k]


def knn_posterior(train: Dataset, query_features, cfg: KnnConfig = KnnConfig()) -> np.ndarray:
    """Tag scores ``sum_j exp(-||x - x_j||^2 / sigma) / k * y_j`` over the
    ``k`` nearest training examples. Accepts one query or a batch."""
    q = np.asarray(query_features, dtype=np.float64)
    single = q.ndim == 1
    Q = q[None, :] if single else q
    if Q.ndim != 2 or Q.shape[1] != train.dim:
        raise ValidationError(f"query dimension does not match training dim {train.dim}")
    if cfg.k > len(train):
        raise ValidationError(f"k={cfg.k} exceeds training set size {len(train)}")
    X = train.X
    Y = train.Y.astype(np.float64)
    out = np.empty((Q.shape[0], train.num_tags))
    for i, x in enumerate(Q):
        diff = X - x
        d2 = (diff * diff).sum(axis=1)
        nb = _neighbors(d2, cfg.k)
        w = np.exp(-d2[nb] / cfg.sigma) / cfg.k
        out[i] = np.minimum((w[:, None] * Y[nb]).sum(axis=0), 1.0)
    return out[0] if single else out


@dataclass(frozen=True)
class SvmConfig:
    C: float = 2.0
    epochs: int = 30
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    decay_factor: float = 0.5
    decay_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise ValidationError("C must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.decay_every < 1:
            raise ValidationError("epochs, batch_size and decay_every must be positive")
        if self.learning_rate < 0 or not 0 <= self.momentum < 1:
            raise ValidationError("invalid learning_rate or momentum")
        if not 0 < self.decay_factor <= 1:
            raise ValidationError("decay_factor must be in (0, 1]")


@dataclass(frozen=True, eq=False)
class SvmModel:
    weights: np.ndarray  # (c, d)
    biases: np.ndarray   # (c,)
    C: float = 2.0

    @property
    def num_tags(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def svm_objective(w, b, X, t, C) -> float:
    """``0.5*||w||^2 + C * sum_i max(0, 1 - t_i (w.x_i + b))``."""
    hinge = np.maximum(0.0, 1.0 - t * (X @ w + b))
    return float(0.5 * w @ w + C * hinge.sum())


def _fit_one(X, t, cfg: SvmConfig):
    """Mini-batch subgradient descent with momentum on the primal objective
    divided by n. Returns the best iterate by full objective seen at epoch
    boundaries, starting from w = 0, b = 0."""
    n, d = X.shape
    w, b = np.zeros(d), 0.0
    vw, vb = np.zeros(d), 0.0
    best = (svm_objective(w, b, X, t, cfg.C), w, b)
    rng = np.random.default_rng(cfg.seed)
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate * cfg.decay_factor ** (epoch // cfg.decay_every)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            Xb, tb = X[idx], t[idx]
            active = (tb * (Xb @ w + b) < 1.0) * tb    # zero subgradient at the kink
            gw = w / n - cfg.C * (active @ Xb) / len(idx)
            gb = -cfg.C * active.sum() / len(idx)
            vw = cfg.momentum * vw - lr * gw
            vb = cfg.momentum * vb - lr * gb
            w = w + vw
            b = b + vb
        obj = svm_objective(w, b, X, t, cfg.C)
        if obj < best[0]:
            best = (obj, w, b)
    return best[1], best[2]


def svm_train(train: Dataset, cfg: SvmConfig = SvmConfig(), tags=None) -> SvmModel:
    """Train one linear SVM per tag.

    Tags with no positive training example get ``w = 0, b = -1``.
    ``tags`` restricts/reorders which tags are fitted in this call; each
    tag's model only depends on its own column, so the result is the same
    for any order.
    """
    if len(train) == 0:
        raise ValidationError("cannot train an SVM on an empty dataset")
    X = train.X
    Y = train.Y
    c = train.num_tags
    tags = np.arange(c) if tags is None else np.asarray(tags, dtype=int)
    W = np.zeros((c, train.dim))
    B = np.full(c, -1.0)
    for j in tags:
        if Y[:, j].any():
            W[j], B[j] = _fit_one(X, np.where(Y[:, j], 1.0, -1.0), cfg)
    return SvmModel(W, B, cfg.C)


def svm_scores(model: SvmModel, query_features) -> np.ndarray:
    q = np.asarray(query_features, dtype=np.float64)
    if q.shape[-1] != model.dim:
        raise ValidationError(f"query dimension {q.shape[-1]} != model dim {model.dim}")
    return q @ model.weights.T + model.biases


def save_svm(model: SvmModel, path) -> None:
    header = {"format": SVM_FORMAT, "version": 1, "num_tags": model.num_tags,
              "dim": model.dim, "C": model.C}
    _textio.write_jsonl(path, [header] + [
        {"tag": j, "weight": model.weights[j], "bias": model.biases[j]}
        for j in range(model.num_tags)])


def load_svm(path) -> SvmModel:
    rows = list(_textio.read_jsonl(path))
    if not rows or rows[0][1].get("format") != SVM_FORMAT:
        raise ValidationError(f"{path}: not an SVM checkpoint")
    header = rows[0][1]
    c, d = header["num_tags"], header["dim"]
    W = np.zeros((c, d))
    B = np.zeros(c)
    if len(rows) - 1 != c:
        raise ValidationError(f"{path}: expected {c} tag records")
    for j, (lineno, rec) in enumerate(rows[1:]):
        if rec.get("tag") != j or len(rec.get("weight", ())) != d:
            raise ValidationError(f"{path}:{lineno}: malformed record for tag {j}")
        W[j] = rec["weight"]
        B[j] = rec["bias"]
    return SvmModel(W, B, float(header["C"]))
