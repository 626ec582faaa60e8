"""Loss/baseline comparison grid: upper bound, kNN, SVM and the three
trained losses evaluated on a shared split, repeated over seeds."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ._textio import fmt_float
from .baselines import KnnConfig, SvmConfig, knn_posterior, svm_scores, svm_train
from .core import Dataset
from .data import split
from .metrics import HEADLINE, MetricsReport, compute_metrics, topk_indicator, upper_bound_predictions
from .optimizer import TrainConfig, train
from .scorer import forward

logger = logging.getLogger(__name__)

METHODS = ("upper_bound", "knn", "svm", "softmax", "pairwise", "warp")


@dataclass(frozen=True)
class CompareConfig:
    ks: tuple[int, ...] = (3, 5)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    train_fraction: float = 0.75
    train: TrainConfig = field(default_factory=TrainConfig)
    knn: KnnConfig = field(default_factory=KnnConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)


def score_matrices(train_set: Dataset, test_set: Dataset, cfg: CompareConfig,
                   seed: int) -> dict[str, np.ndarray]:
    """Test-set score matrices for every learned method at one seed."""
    out = {"knn": knn_posterior(train_set, test_set.X, cfg.knn)}
    logger.info("seed %d: knn done", seed)
    out["svm"] = svm_scores(svm_train(train_set, replace(cfg.svm, seed=seed)), test_set.X)
    logger.info("seed %d: svm done", seed)
    for kind in ("softmax", "pairwise", "warp"):
        params, _ = train(train_set, replace(cfg.train, loss_kind=kind, seed=seed))
        out[kind] = forward(params, test_set.X, "eval")[0]
        logger.info("seed %d: %s done", seed, kind)
    return out


def run_seed(dataset: Dataset, cfg: CompareConfig, seed: int) -> dict[int, dict[str, MetricsReport]]:
    """``{k: {method: report}}`` for one seed."""
    train_set, test_set = split(dataset, cfg.train_fraction, seed)
    scores = score_matrices(train_set, test_set, cfg, seed)
    reports = {}
    for k in cfg.ks:
        row = {"upper_bound": compute_metrics(
            upper_bound_predictions(test_set, k, seed), test_set, k)}
        for name, S in scores.items():
            row[name] = compute_metrics(topk_indicator(S, k), test_set, k)
        reports[k] = {m: row[m] for m in METHODS}
    return reports


def compare(dataset: Dataset, cfg: CompareConfig = CompareConfig()):
    """Run every seed and return ``(per_seed, median)`` where ``median`` is
    ``{k: {method: {metric: value}}}`` taken over seeds."""
    per_seed = [run_seed(dataset, cfg, s) for s in cfg.seeds]
    median = {
        k: {m: {metric: float(np.median([r[k][m].headline()[metric] for r in per_seed]))
                for metric in HEADLINE}
            for m in METHODS}
        for k in cfg.ks}
    return per_seed, median


def format_grid(median) -> str:
    """Tab-separated grid: one row per (k, method), five metric columns."""
    out = io.StringIO()
    out.write("k\tmethod\t" + "\t".join(HEADLINE) + "\n")
    for k, rows in median.items():
        for m in METHODS:
            out.write(f"{k}\t{m}\t" + "\t".join(fmt_float(rows[m][h]) for h in HEADLINE) + "\n")
    return out.getvalue()


def format_pretty(median) -> str:
    lines = []
    for k, rows in median.items():
        lines.append(f"k={k}")
        lines.append(f"{'method':<12}" + "".join(f"{h:>22}" for h in HEADLINE))
        for m in METHODS:
            lines.append(f"{m:<12}" + "".join(f"{rows[m][h]:>22.2f}" for h in HEADLINE))
    return "\n".join(lines)
