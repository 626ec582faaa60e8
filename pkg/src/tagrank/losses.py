"""Multilabel losses on a single score vector.

Each loss returns a :class:`~tagrank.core.LossResult` holding the scalar
value and the (sub)gradient with respect to the scores. Hinge kinks get a
zero subgradient.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .core import LabelVector, LossResult, ValidationError, check_scores

LOG_FLOOR = 1e-12
LOSS_KINDS = ("softmax", "pairwise", "warp")

_SAMPLE_CHUNK = 256


def softmax_probs(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    e = np.exp(s - s.max())
    return e / e.sum()


def softmax_kl_loss(scores, labels: LabelVector) -> LossResult:
    """Cross-entropy between softmax(scores) and the L1-normalized label
    vector. Differs from the KL divergence by the (constant) entropy of the
    target, so the gradient ``p - target`` is the same."""
    s = check_scores(scores, labels.indicator.shape[0])
    p = softmax_probs(s)
    target = labels.indicator / labels.c_plus
    pos = labels.indicator > 0
    value = -float(np.sum(target[pos] * np.log(np.maximum(p[pos], LOG_FLOOR))))
    return LossResult(value, p - target)


def pairwise_rank_loss(scores, labels: LabelVector) -> LossResult:
    """Sum of margin-1 hinges over every (positive, negative) tag pair."""
    s = check_scores(scores, labels.indicator.shape[0])
    grad = np.zeros_like(s)
    if labels.c_minus == 0:
        return LossResult(0.0, grad)
    pos, neg = labels.positives, labels.negatives
    margins = 1.0 - s[pos][:, None] + s[neg][None, :]
    active = margins > 0
    value = float(margins[active].sum())
    grad[pos] -= active.sum(axis=1)
    grad[neg] += active.sum(axis=0)
    return LossResult(value, grad)


_HARMONIC = [0.0]


def warp_weight(r: int) -> float:
    """Rank weight ``sum_{j=1}^{r} 1/j``."""
    if r < 1:
        raise ValidationError(f"rank weight undefined for r={r}")
    while len(_HARMONIC) <= r:
        _HARMONIC.append(_HARMONIC[-1] + 1.0 / len(_HARMONIC))
    return _HARMONIC[r]


@dataclass(frozen=True)
class WarpConfig:
    """Sampling settings for WARP.

    ``max_trials=None`` caps sampling at the number of negative tags of
    each example.
    """

    max_trials: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_trials is not None and self.max_trials < 1:
            raise ValidationError("max_trials must be >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ValidationError("rng_seed must be a 64-bit unsigned integer")

    def trials_for(self, labels: LabelVector) -> int:
        return labels.c_minus if self.max_trials is None else self.max_trials


@dataclass(frozen=True)
class RankEstimate:
    rank: int
    trials: int
    violator: int | None


def _rng(rng, cfg: WarpConfig) -> np.random.Generator:
    return np.random.default_rng(cfg.rng_seed) if rng is None else rng


def estimate_rank(scores, positive: int, labels: LabelVector,
                  cfg: WarpConfig = WarpConfig(), rng=None) -> RankEstimate:
    """Draw negatives uniformly with replacement until one violates the
    margin against ``positive``; the rank estimate is floor((c-1)/trials).

    Returns ``violator=None`` (and ``rank=0``) when ``cfg`` runs out of
    trials first.
    """
    s = np.asarray(scores, dtype=np.float64)
    c = s.shape[0]
    if labels.indicator[positive] == 0:
        raise ValidationError(f"tag {positive} is not a positive label")
    neg = labels.negatives
    if neg.size == 0:
        raise ValidationError("no negative labels to sample")
    max_trials = cfg.trials_for(labels)
    violates = 1.0 - s[positive] + s[neg] > 0
    if not violates.any():
        return RankEstimate(0, max_trials, None)
    rng = _rng(rng, cfg)
    done = 0
    while done < max_trials:
        n = min(_SAMPLE_CHUNK, max_trials - done)
        draws = rng.integers(0, neg.size, size=n)
        hit = violates[draws]
        if hit.any():
            first = int(np.argmax(hit))
            trials = done + first + 1
            return RankEstimate((c - 1) // trials, trials, int(neg[draws[first]]))
        done += n
    return RankEstimate(0, max_trials, None)


def warp_term(scores, positive: int, estimate: RankEstimate) -> LossResult:
    """WARP contribution of one positive for a fixed sampled outcome."""
    s = np.asarray(scores, dtype=np.float64)
    grad = np.zeros_like(s)
    if estimate.violator is None or estimate.rank < 1:
        return LossResult(0.0, grad)
    k = estimate.violator
    weight = warp_weight(estimate.rank)
    grad[positive] -= weight
    grad[k] += weight
    return LossResult(float(weight * (1.0 - s[positive] + s[k])), grad)


def warp_loss(scores, labels: LabelVector, cfg: WarpConfig = WarpConfig(),
              rng=None) -> LossResult:
    """Weighted approximate-rank pairwise loss.

    Each positive tag (in index order) samples one violating negative;
    the hinge against it is weighted by the rank weight of the estimated
    rank. Positives with no violator found contribute nothing.
    """
    s = check_scores(scores, labels.indicator.shape[0])
    grad = np.zeros_like(s)
    if labels.c_minus == 0:
        return LossResult(0.0, grad)
    rng = _rng(rng, cfg)
    value = 0.0
    for j in labels.positives:
        est = estimate_rank(s, int(j), labels, cfg, rng)
        term = warp_term(s, int(j), est)
        value += term.value
        grad += term.grad
    return LossResult(value, grad)


def loss_fn(kind: str):
    """Return ``f(scores, labels, rng) -> LossResult`` for a loss name."""
    if kind == "softmax":
        return lambda s, y, rng=None, cfg=None: softmax_kl_loss(s, y)
    if kind == "pairwise":
        return lambda s, y, rng=None, cfg=None: pairwise_rank_loss(s, y)
    if kind == "warp":
        return lambda s, y, rng=None, cfg=None: warp_loss(
            s, y, cfg or WarpConfig(), rng)
    raise ValidationError(
        f"unknown loss {kind!r}; expected one of {', '.join(LOSS_KINDS)}")
