"""Mini-batch SGD with momentum and a staircase learning-rate schedule."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from .core import Dataset, NumericalError, ValidationError, label_vector_from
from .losses import LOSS_KINDS, WarpConfig, loss_fn
from .scorer import ScorerParams, backward, forward, init_params

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.002
    momentum: float = 0.9
    batch_size: int = 32
    decay_factor: float = 0.5
    decay_every: int = 10
    epochs: int = 40
    seed: int = 0
    loss_kind: str = "warp"
    hidden: tuple[int, ...] = (256,)
    dropout_ratio: float = 0.6
    max_trials: int | None = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValidationError("momentum must be in [0, 1)")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be positive")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ValidationError("decay_factor must be in (0, 1]")
        if self.decay_every < 1:
            raise ValidationError("decay_every must be positive")
        if self.epochs < 1:
            raise ValidationError("epochs must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.loss_kind not in LOSS_KINDS:
            raise ValidationError(
                f"unknown loss {self.loss_kind!r}; expected one of {', '.join(LOSS_KINDS)}")
        if any(h < 1 for h in self.hidden):
            raise ValidationError("hidden widths must be positive")
        if not 0.0 <= self.dropout_ratio < 1.0:
            raise ValidationError("dropout_ratio must be in [0, 1)")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass(frozen=True)
class TrainState:
    params: ScorerParams
    velocity: tuple  # arrays aligned with params.flat()
    epoch: int = 0
    step: int = 0

    @classmethod
    def start(cls, params: ScorerParams) -> TrainState:
        return cls(params, tuple(np.zeros_like(a) for a in params.flat()))


@dataclass(frozen=True)
class LogRecord:
    epoch: int
    step: int
    lr: float
    mean_loss: float
    elapsed_seconds: float

    def as_dict(self, timing=True) -> dict:
        d = {"epoch": self.epoch, "step": self.step, "lr": self.lr,
             "mean_loss": self.mean_loss}
        if timing:
            d["elapsed_seconds"] = self.elapsed_seconds
        return d


def staircase_lr(config: TrainConfig, epoch: int) -> float:
    if epoch < 0:
        raise ValidationError("epoch must be non-negative")
    return config.learning_rate * config.decay_factor ** (epoch // config.decay_every)


def sgd_momentum_step(state: TrainState, grads, lr: float,
                      momentum: float = 0.9) -> TrainState:
    """``v <- momentum * v - lr * g``; ``params <- params + v``.

    ``grads`` is either ``[(dW, db), ...]`` or a flat array list aligned
    with ``state.params.flat()``.
    """
    flat_g = [a for pair in grads for a in pair] if isinstance(grads[0], tuple) else list(grads)
    flat_p = state.params.flat()
    if len(flat_g) != len(flat_p) or any(
            np.shape(g) != p.shape for g, p in zip(flat_g, flat_p)):
        raise ValidationError("gradient shapes do not match parameters")
    velocity = tuple(momentum * v - lr * np.asarray(g)
                     for v, g in zip(state.velocity, flat_g))
    params = state.params.with_arrays([p + v for p, v in zip(flat_p, velocity)])
    return replace(state, params=params, velocity=velocity, step=state.step + 1)


def _streams(seed: int):
    init_ss, shuffle_ss, dropout_ss, warp_ss = np.random.SeedSequence(seed).spawn(4)
    return (int(init_ss.generate_state(1)[0]),
            np.random.default_rng(shuffle_ss),
            np.random.default_rng(dropout_ss),
            np.random.default_rng(warp_ss))


def train(dataset: Dataset, config: TrainConfig, params: ScorerParams | None = None,
          callback=None):
    """Fit a scorer on ``dataset``.

    Returns ``(params, log)`` where ``log`` holds one :class:`LogRecord`
    per epoch. ``callback(record)`` is called after each epoch.
    Raises :class:`NumericalError` if a loss or gradient goes non-finite.
    """
    n = len(dataset)
    if n == 0:
        raise ValidationError("cannot train on an empty dataset")
    init_seed, shuffle_rng, dropout_rng, warp_rng = _streams(config.seed)
    if params is None:
        arch = (dataset.dim, *config.hidden, dataset.num_tags)
        params = init_params(arch, config.dropout_ratio, init_seed)
    elif params.architecture[0] != dataset.dim or params.num_tags != dataset.num_tags:
        raise ValidationError("scorer architecture does not match dataset")
    lf = loss_fn(config.loss_kind)
    warp_cfg = WarpConfig(config.max_trials)
    labels = [label_vector_from(ex, dataset.num_tags) for ex in dataset.examples]
    X = dataset.X

    state = TrainState.start(params)
    log = []
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        lr = staircase_lr(config, epoch)
        order = shuffle_rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                scores, trace = forward(state.params, X[idx], "train", dropout_rng)
            if not np.all(np.isfinite(scores)):
                raise NumericalError(
                    f"non-finite scores at step {state.step}, epoch {epoch}, batch {b}")
            G = np.empty_like(scores)
            batch_loss = 0.0
            for r, i in enumerate(idx):
                res = lf(scores[r], labels[i], warp_rng, warp_cfg)
                batch_loss += res.value
                G[r] = res.grad
            if not (np.isfinite(batch_loss) and np.all(np.isfinite(G))):
                raise NumericalError(
                    f"non-finite loss at step {state.step}, epoch {epoch}, batch {b}")
            total += batch_loss
            grads = backward(state.params, trace, G / len(idx))
            try:
                state = sgd_momentum_step(state, grads, lr, config.momentum)
            except ValidationError:
                raise NumericalError(
                    f"non-finite update at step {state.step}, epoch {epoch}, batch {b}"
                ) from None
        state = replace(state, epoch=epoch + 1)
        rec = LogRecord(epoch, state.step, lr, total / n, time.perf_counter() - t0)
        log.append(rec)
        logger.debug("epoch %d lr %.6g loss %.6g", epoch, lr, rec.mean_loss)
        if callback is not None:
            callback(rec)
    return state.params, log
