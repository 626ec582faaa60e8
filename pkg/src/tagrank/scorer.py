"""Small fully connected scorer: affine layers with ReLU and inverted
dropout between them, linear output."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _textio
from .core import ValidationError

CHECKPOINT_FORMAT = "tagrank-scorer"


@dataclass(frozen=True, eq=False)
class ScorerParams:
    layers: tuple  # ((W, b), ...), W has shape (out, in)
    architecture: tuple[int, ...]
    dropout_ratio: float = 0.0

    def __post_init__(self):
        arch = tuple(int(w) for w in self.architecture)
        _check_architecture(arch)
        if not 0.0 <= self.dropout_ratio < 1.0:
            raise ValidationError("dropout_ratio must be in [0, 1)")
        layers = []
        if len(self.layers) != len(arch) - 1:
            raise ValidationError("layer count does not match architecture")
        for i, (W, b) in enumerate(self.layers):
            W = np.array(W, dtype=np.float64)
            b = np.array(b, dtype=np.float64)
            if W.shape != (arch[i + 1], arch[i]) or b.shape != (arch[i + 1],):
                raise ValidationError(f"layer {i} has incompatible shape")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValidationError(f"layer {i} has non-finite parameters")
            W.setflags(write=False)
            b.setflags(write=False)
            layers.append((W, b))
        object.__setattr__(self, "architecture", arch)
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def num_tags(self) -> int:
        return self.architecture[-1]

    def flat(self) -> list[np.ndarray]:
        return [a for layer in self.layers for a in layer]

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> ScorerParams:
        it = iter(arrays)
        return ScorerParams(tuple((next(it), next(it)) for _ in self.layers),
                            self.architecture, self.dropout_ratio)

    def __eq__(self, other):
        if not isinstance(other, ScorerParams):
            return NotImplemented
        return (self.architecture == other.architecture
                and self.dropout_ratio == other.dropout_ratio
                and all(np.array_equal(a, b)
                        for a, b in zip(self.flat(), other.flat())))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    inputs: np.ndarray
    pre: list = field(default_factory=list)    # pre-activation per layer
    post: list = field(default_factory=list)   # output of each layer, after dropout
    masks: list | None = None                  # scaled keep masks, train mode only
    squeeze: bool = False


def _check_architecture(arch):
    if len(arch) < 2:
        raise ValidationError("architecture needs an input and an output width")
    if any(w < 1 for w in arch):
        raise ValidationError("layer widths must be positive")


def init_params(architecture, dropout_ratio=0.0, seed=0) -> ScorerParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    arch = tuple(int(w) for w in architecture)
    _check_architecture(arch)
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(arch[:-1], arch[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        layers.append((rng.uniform(-bound, bound, size=(fan_out, fan_in)),
                       np.zeros(fan_out)))
    return ScorerParams(tuple(layers), arch, float(dropout_ratio))


def forward(params: ScorerParams, features, mode="eval", rng=None):
    """Score one feature vector or a batch of row vectors.

    Returns ``(scores, trace)``. In ``"train"`` mode every hidden layer is
    followed by inverted dropout drawn from ``rng``.
    """
    if mode not in ("train", "eval"):
        raise ValidationError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(features, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.architecture[0]:
        raise ValidationError(
            f"expected {params.architecture[0]} features, got shape {np.shape(features)}")
    train = mode == "train"
    p = params.dropout_ratio
    if train and p > 0 and rng is None:
        raise ValidationError("train mode with dropout needs an rng")
    trace = ForwardTrace(x, masks=[] if train else None, squeeze=squeeze)
    h = x
    last = len(params.layers) - 1
    for i, (W, b) in enumerate(params.layers):
        z = h @ W.T + b
        trace.pre.append(z)
        if i == last:
            h = z
        else:
            h = np.maximum(z, 0.0)
            if train:
                if p > 0:
                    mask = (rng.random(h.shape) >= p) / (1.0 - p)
                else:
                    mask = np.ones_like(h)
                trace.masks.append(mask)
                h = h * mask
        trace.post.append(h)
    return (h[0] if squeeze else h), trace


def backward(params: ScorerParams, trace: ForwardTrace, grad_scores):
    """Reverse-mode gradients ``[(dW, db), ...]`` summed over the batch."""
    g = np.asarray(grad_scores, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    n = trace.inputs.shape[0]
    if (len(trace.pre) != len(params.layers)
            or trace.inputs.shape[1] != params.architecture[0]
            or g.shape != (n, params.num_tags)
            or any(z.shape != (n, W.shape[0])
                   for z, (W, _) in zip(trace.pre, params.layers))):
        raise ValidationError("trace does not match params or grad_scores")
    grads = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        W, _ = params.layers[i]
        if i < len(params.layers) - 1:
            if trace.masks is not None:
                g = g * trace.masks[i]
            g = g * (trace.pre[i] > 0)
        h_in = trace.inputs if i == 0 else trace.post[i - 1]
        grads[i] = (g.T @ h_in, g.sum(axis=0))
        if i > 0:
            g = g @ W
    return grads


def save_params(params: ScorerParams, path) -> None:
    header = {"format": CHECKPOINT_FORMAT, "version": 1,
              "architecture": list(params.architecture),
              "dropout_ratio": params.dropout_ratio}
    records = [header] + [{"layer": i, "weight": W, "bias": b}
                          for i, (W, b) in enumerate(params.layers)]
    _textio.write_jsonl(path, records)


def load_params(path) -> ScorerParams:
    rows = list(_textio.read_jsonl(path))
    if not rows or rows[0][1].get("format") != CHECKPOINT_FORMAT:
        raise ValidationError(f"{path}: not a scorer checkpoint")
    header = rows[0][1]
    layers = []
    for i, (lineno, rec) in enumerate(rows[1:]):
        if rec.get("layer") != i:
            raise ValidationError(f"{path}:{lineno}: expected layer {i}")
        layers.append((np.array(rec["weight"], dtype=np.float64).reshape(
            header["architecture"][i + 1], header["architecture"][i]),
            np.array(rec["bias"], dtype=np.float64)))
    return ScorerParams(tuple(layers), tuple(header["architecture"]),
                        float(header["dropout_ratio"]))
