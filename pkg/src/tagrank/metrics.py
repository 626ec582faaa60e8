"""Top-k annotation protocol: per-class and overall precision/recall, N+,
and the ground-truth upper bound."""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._textio import fmt_float
from .core import Dataset, ValidationError

HEADLINE = ("per_class_recall", "per_class_precision", "overall_recall",
            "overall_precision", "n_plus")


def topk_assign(scores, k: int) -> frozenset[int]:
    """The ``min(k, c)`` highest-scoring tags; ties go to the lower index."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    s = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-s, kind="stable")
    return frozenset(int(j) for j in order[:k])


def topk_indicator(S, k: int) -> np.ndarray:
    """Row-wise :func:`topk_assign` on a score matrix, as a bool matrix."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    S = np.asarray(S, dtype=np.float64)
    order = np.argsort(-S, axis=1, kind="stable")[:, :k]
    P = np.zeros(S.shape, dtype=bool)
    np.put_along_axis(P, order, True, axis=1)
    return P


def _as_indicator(pred, n: int, c: int) -> np.ndarray:
    if isinstance(pred, np.ndarray) and pred.ndim == 2:
        P = pred.astype(bool)
        if P.shape != (n, c):
            raise ValidationError(f"prediction matrix shape {P.shape} != {(n, c)}")
        return P
    pred = list(pred)
    if len(pred) != n:
        raise ValidationError(f"{len(pred)} predictions for {n} test examples")
    P = np.zeros((n, c), dtype=bool)
    for i, tags in enumerate(pred):
        tags = list(tags)
        if any(not 0 <= j < c for j in tags):
            raise ValidationError(f"prediction {i} has a tag index out of range")
        P[i, tags] = True
    return P


@dataclass(frozen=True)
class TagRecord:
    tag: int
    name: str
    n_ground_truth: int
    n_predicted: int
    n_correct: int
    recall: float
    precision: float


@dataclass(frozen=True)
class MetricsReport:
    """Headline metrics as percentages plus the per-tag breakdown."""

    k: int
    per_class_recall: float
    per_class_precision: float
    overall_recall: float
    overall_precision: float
    n_plus: float
    per_tag: tuple[TagRecord, ...]

    def headline(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in HEADLINE}

    def totals(self) -> tuple[int, int, int]:
        """(sum N_g, sum N_p, sum N_c)."""
        return (sum(t.n_ground_truth for t in self.per_tag),
                sum(t.n_predicted for t in self.per_tag),
                sum(t.n_correct for t in self.per_tag))

    def overall_exact(self) -> tuple[Fraction, Fraction]:
        """Overall (recall, precision) as exact fractions in [0, 1]."""
        g, p, c = self.totals()
        return (Fraction(c, g) if g else Fraction(0),
                Fraction(c, p) if p else Fraction(0))

    def to_table(self) -> str:
        """Tab-separated per-tag table preceded by ``# key=value`` headline
        lines; the ``ALL`` row carries totals and overall recall/precision."""
        out = io.StringIO()
        out.write(f"# k={self.k}\n")
        for name, value in self.headline().items():
            out.write(f"# {name}={fmt_float(value)}\n")
        out.write("tag\tname\tn_ground_truth\tn_predicted\tn_correct\trecall\tprecision\n")
        g, p, c = self.totals()
        out.write(f"ALL\theadline\t{g}\t{p}\t{c}\t{fmt_float(self.overall_recall)}\t"
                  f"{fmt_float(self.overall_precision)}\n")
        for t in self.per_tag:
            out.write(f"{t.tag}\t{t.name}\t{t.n_ground_truth}\t{t.n_predicted}\t"
                      f"{t.n_correct}\t{fmt_float(t.recall)}\t{fmt_float(t.precision)}\n")
        return out.getvalue()

    def summary(self) -> str:
        return "  ".join(f"{name}={value:.2f}" for name, value in self.headline().items())


def _ratio(a: int, b: int) -> float:
    return 100.0 * a / b if b else 0.0


def compute_metrics(predictions, ground_truth, k: int,
                    tag_names: Sequence[str] | None = None) -> MetricsReport:
    """Score predicted tag sets against ground truth.

    ``predictions`` is a sequence of tag-index collections or an (n, c)
    indicator matrix; ``ground_truth`` is a :class:`Dataset` or an
    indicator matrix. Per-tag ratios with a zero denominator count as 0
    and per-class averages divide by the full tag count.
    """
    if isinstance(ground_truth, Dataset):
        Y = ground_truth.Y
        tag_names = tag_names or ground_truth.tag_names
    else:
        Y = np.asarray(ground_truth).astype(bool)
    n, c = Y.shape
    tag_names = tag_names or tuple(str(j) for j in range(c))
    P = _as_indicator(predictions, n, c)
    n_g = Y.sum(axis=0)
    n_p = P.sum(axis=0)
    n_c = (Y & P).sum(axis=0)
    per_tag = tuple(
        TagRecord(j, tag_names[j], int(n_g[j]), int(n_p[j]), int(n_c[j]),
                  _ratio(n_c[j], n_g[j]), _ratio(n_c[j], n_p[j]))
        for j in range(c))
    tg, tp, tc = int(n_g.sum()), int(n_p.sum()), int(n_c.sum())
    return MetricsReport(
        k=k,
        per_class_recall=sum(t.recall for t in per_tag) / c,
        per_class_precision=sum(t.precision for t in per_tag) / c,
        overall_recall=_ratio(tc, tg),
        overall_precision=_ratio(tc, tp),
        n_plus=100.0 * int(np.count_nonzero(n_c)) / c,
        per_tag=per_tag,
    )


def upper_bound_predictions(ground_truth, k: int, seed=0) -> list[frozenset[int]]:
    """Best-case k-tag predictions built from the ground truth itself.

    Examples with at least ``k`` true tags get a uniform random k-subset
    of them; the rest keep all true tags and are padded with distinct
    random non-true tags.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    Y = ground_truth.Y if isinstance(ground_truth, Dataset) else np.asarray(ground_truth, bool)
    c = Y.shape[1]
    rng = np.random.default_rng(seed)
    preds = []
    for row in Y:
        gt = np.flatnonzero(row)
        if gt.size >= k:
            chosen = rng.choice(gt, size=k, replace=False)
        else:
            others = np.flatnonzero(~row)
            pad = rng.choice(others, size=min(k, c) - gt.size, replace=False)
            chosen = np.concatenate([gt, pad])
        preds.append(frozenset(int(j) for j in chosen))
    return preds
