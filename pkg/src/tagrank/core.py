"""Domain types shared across the package.

Score vectors are plain 1-D float arrays of length ``num_tags``; everything
else here is a small immutable value type with validation on construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a documented invariant."""


class NumericalError(ArithmeticError):
    """Raised when training produces a non-finite value."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Example:
    """One data point: a dense feature vector and its positive tag indices."""

    features: np.ndarray
    labels: frozenset[int]

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        if feats.ndim != 1:
            raise ValidationError("features must be a 1-D sequence")
        if not np.all(np.isfinite(feats)):
            raise ValidationError("features must be finite")
        labels = list(self.labels)
        if len(labels) == 0:
            raise ValidationError("empty label set")
        for j in labels:
            if int(j) != j or j < 0:
                raise ValidationError(f"invalid label index {j!r}")
        if len(set(labels)) != len(labels):
            raise ValidationError("duplicate label index")
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "labels", frozenset(int(j) for j in labels))

    def check(self, num_tags: int, dim: int) -> None:
        if self.features.shape[0] != dim:
            raise ValidationError(
                f"feature length {self.features.shape[0]} != dim {dim}")
        bad = [j for j in self.labels if j >= num_tags]
        if bad:
            raise ValidationError(
                f"label index {min(bad)} out of range for {num_tags} tags")

    def __eq__(self, other):
        if not isinstance(other, Example):
            return NotImplemented
        return (self.labels == other.labels
                and np.array_equal(self.features, other.features))

    def __hash__(self):
        return hash((self.features.tobytes(), self.labels))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered collection of examples sharing a tag dictionary."""

    examples: tuple[Example, ...]
    num_tags: int
    dim: int
    tag_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if int(self.num_tags) < 1:
            raise ValidationError("num_tags must be positive")
        if int(self.dim) < 1:
            raise ValidationError("dim must be positive")
        object.__setattr__(self, "examples", tuple(self.examples))
        names = tuple(self.tag_names) or default_tag_names(self.num_tags)
        if len(names) != self.num_tags:
            raise ValidationError(
                f"expected {self.num_tags} tag names, got {len(names)}")
        object.__setattr__(self, "tag_names", tuple(str(s) for s in names))
        for i, ex in enumerate(self.examples):
            try:
                ex.check(self.num_tags, self.dim)
            except ValidationError as e:
                raise ValidationError(f"example {i}: {e}") from None

    @classmethod
    def from_arrays(cls, X, labels, num_tags=None, tag_names=()) -> Dataset:
        """Build from a feature matrix and either an indicator matrix or a
        sequence of label-index collections."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValidationError("X must be 2-D")
        if isinstance(labels, np.ndarray) and labels.ndim == 2:
            if num_tags is None:
                num_tags = labels.shape[1]
            label_sets = [np.flatnonzero(row).tolist() for row in labels]
        else:
            label_sets = [list(s) for s in labels]
            if num_tags is None:
                num_tags = 1 + max(max(s) for s in label_sets if s)
        if len(label_sets) != X.shape[0]:
            raise ValidationError("X and labels have different lengths")
        examples = tuple(Example(x, frozenset(s)) for x, s in zip(X, label_sets))
        return cls(examples, int(num_tags), X.shape[1], tuple(tag_names))

    def __len__(self):
        return len(self.examples)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.num_tags == other.num_tags and self.dim == other.dim
                and self.tag_names == other.tag_names
                and self.examples == other.examples)

    __hash__ = None

    @cached_property
    def X(self) -> np.ndarray:
        """Feature matrix of shape (n, dim)."""
        if not self.examples:
            return _frozen(np.zeros((0, self.dim)))
        return _frozen(np.stack([ex.features for ex in self.examples]))

    @cached_property
    def Y(self) -> np.ndarray:
        """Boolean indicator matrix of shape (n, num_tags)."""
        Y = np.zeros((len(self.examples), self.num_tags), dtype=bool)
        for i, ex in enumerate(self.examples):
            Y[i, list(ex.labels)] = True
        return _frozen(Y)

    def subset(self, indices: Iterable[int]) -> Dataset:
        return Dataset(tuple(self.examples[i] for i in indices),
                       self.num_tags, self.dim, self.tag_names)

    def tag_counts(self) -> np.ndarray:
        return self.Y.sum(axis=0)


def default_tag_names(num_tags: int) -> tuple[str, ...]:
    width = max(3, len(str(num_tags - 1)))
    return tuple(f"tag{j:0{width}d}" for j in range(num_tags))


@dataclass(frozen=True, eq=False)
class LabelVector:
    indicator: np.ndarray
    c_plus: int
    c_minus: int

    @property
    def positives(self) -> np.ndarray:
        return np.flatnonzero(self.indicator)

    @property
    def negatives(self) -> np.ndarray:
        return np.flatnonzero(self.indicator == 0)


def label_vector_from(example: Example | Sequence[int] | frozenset,
                      c: int) -> LabelVector:
    """0/1 indicator of length ``c`` for an example's label set."""
    labels = example.labels if isinstance(example, Example) else list(example)
    if len(labels) == 0:
        raise ValidationError("empty label set")
    ind = np.zeros(c, dtype=np.float64)
    for j in labels:
        if not 0 <= j < c:
            raise ValidationError(f"label index {j} out of range [0, {c})")
        ind[j] = 1.0
    c_plus = int(ind.sum())
    return LabelVector(_frozen(ind), c_plus, c - c_plus)


@dataclass(frozen=True, eq=False)
class LossResult:
    value: float
    grad: np.ndarray


def check_scores(scores, c: int | None = None) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise ValidationError("scores must be 1-D")
    if c is not None and s.shape[0] != c:
        raise ValidationError(f"scores length {s.shape[0]} != {c}")
    if not np.all(np.isfinite(s)):
        raise ValidationError("scores must be finite")
    return s
