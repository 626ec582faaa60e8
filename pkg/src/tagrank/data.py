"""Dataset files and synthetic long-tail multilabel data.

File format (UTF-8, one JSON object per line)::

    {"format":"tagrank-dataset","version":1,"num_tags":c,"dim":d,"tag_names":[...]}
    {"features":[...],"labels":[...]}
    ...

Floats are written with 17 significant digits so a save/load round trip
is lossless. Tag indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _textio
from .core import Dataset, Example, ValidationError, default_tag_names

DATASET_FORMAT = "tagrank-dataset"


def save_dataset(dataset: Dataset, path) -> None:
    header = {"format": DATASET_FORMAT, "version": 1,
              "num_tags": dataset.num_tags, "dim": dataset.dim,
              "tag_names": list(dataset.tag_names)}
    records = [header] + [{"features": ex.features, "labels": sorted(ex.labels)}
                          for ex in dataset.examples]
    _textio.write_jsonl(path, records)


def load_dataset(path) -> Dataset:
    try:
        rows = _textio.read_jsonl(path)
        first = next(rows, None)
        if first is None:
            raise ValidationError(f"{path}: no examples (empty file)")
        lineno, header = first
        if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
            raise ValidationError(f"{path}:{lineno}: missing dataset header")
        c, d = header.get("num_tags"), header.get("dim")
        if not isinstance(c, int) or c < 1 or not isinstance(d, int) or d < 1:
            raise ValidationError(f"{path}:{lineno}: num_tags and dim must be positive integers")
        examples = []
        for lineno, rec in rows:
            try:
                ex = Example(rec["features"], frozenset(rec["labels"]))
                if len(rec["labels"]) != len(ex.labels):
                    raise ValidationError("duplicate label index")
                ex.check(c, d)
            except (KeyError, TypeError) as e:
                raise ValidationError(f"{path}:{lineno}: malformed record ({e})") from None
            except ValidationError as e:
                raise ValidationError(f"{path}:{lineno}: {e}") from None
            examples.append(ex)
    except ValueError as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(str(e)) from None
    if not examples:
        raise ValidationError(f"{path}: no examples")
    return Dataset(tuple(examples), c, d, tuple(header.get("tag_names") or ()))


@dataclass(frozen=True)
class SynthConfig:
    """Settings for :func:`generate_synthetic`.

    Tag ``j`` is drawn with probability proportional to ``(j+1)**-zipf_exponent``
    so tag 0 is the most frequent. Prototype coordinates are
    N(0, prototype_std**2), with ``None`` meaning ``1/sqrt(feature_dim)``
    (unit expected norm); ``noise_sigma`` is the per-coordinate noise
    standard deviation.
    """

    num_examples: int = 5000
    num_tags: int = 81
    feature_dim: int = 64
    zipf_exponent: float = 1.0
    labels_per_example: tuple[int, int] = (2, 5)
    noise_sigma: float = 1.0
    seed: int = 0
    prototype_std: float | None = 0.5

    def __post_init__(self):
        lo, hi = self.labels_per_example
        if self.num_examples < 1 or self.num_tags < 1 or self.feature_dim < 1:
            raise ValidationError("num_examples, num_tags and feature_dim must be positive")
        if self.zipf_exponent <= 0:
            raise ValidationError("zipf_exponent must be positive")
        if not 1 <= lo <= hi <= self.num_tags:
            raise ValidationError(
                f"labels_per_example must satisfy 1 <= min <= max <= num_tags, got {(lo, hi)}")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")
        if self.prototype_std is not None and not self.prototype_std > 0:
            raise ValidationError("prototype_std must be positive")
        object.__setattr__(self, "labels_per_example", (int(lo), int(hi)))


def zipf_probabilities(num_tags: int, exponent: float) -> np.ndarray:
    w = np.arange(1, num_tags + 1, dtype=np.float64) ** -exponent
    return w / w.sum()


def generate_synthetic(cfg: SynthConfig = SynthConfig()) -> Dataset:
    """Sum-of-prototypes features with Zipf-distributed tag sets."""
    rng = np.random.default_rng(cfg.seed)
    c, d = cfg.num_tags, cfg.feature_dim
    std = 1.0 / np.sqrt(d) if cfg.prototype_std is None else cfg.prototype_std
    prototypes = rng.normal(0.0, std, size=(c, d))
    probs = zipf_probabilities(c, cfg.zipf_exponent)
    cdf = np.cumsum(probs)
    lo, hi = cfg.labels_per_example
    examples = []
    for _ in range(cfg.num_examples):
        m = int(rng.integers(lo, hi + 1))
        tags: list[int] = []
        while len(tags) < m:
            j = min(int(np.searchsorted(cdf, rng.random(), side="right")), c - 1)
            if j not in tags:
                tags.append(j)
        x = prototypes[tags].sum(axis=0)
        if cfg.noise_sigma > 0:
            x = x + rng.normal(0.0, cfg.noise_sigma, size=d)
        examples.append(Example(x, frozenset(tags)))
    return Dataset(tuple(examples), c, d, default_tag_names(c))


def split(dataset: Dataset, train_fraction: float, seed=0) -> tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError("train_fraction must be in (0, 1)")
    n = len(dataset)
    n_train = int(round(train_fraction * n))
    if n_train == 0 or n_train == n:
        raise ValidationError(f"split of {n} examples at {train_fraction} leaves a side empty")
    order = np.random.default_rng(seed).permutation(n)
    return dataset.subset(order[:n_train]), dataset.subset(order[n_train:])
