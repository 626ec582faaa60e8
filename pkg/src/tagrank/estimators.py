"""scikit-learn compatible taggers.

All three take ``X`` of shape (n, d) and a 0/1 indicator ``Y`` of shape
(n, c). ``decision_function`` returns per-tag scores and ``predict``
returns the top-``k`` tags per row as an indicator matrix.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .baselines import KnnConfig, SvmConfig, knn_posterior, svm_scores, svm_train
from .core import Dataset, ValidationError
from .metrics import compute_metrics, topk_indicator
from .optimizer import TrainConfig, train
from .scorer import forward


def _dataset(X, Y) -> Dataset:
    X, Y = check_X_y(X, Y, multi_output=True, dtype=np.float64)
    if Y.ndim != 2:
        raise ValidationError("Y must be a 2-D tag indicator matrix")
    if not np.isin(Y, (0, 1)).all():
        raise ValidationError("Y must contain only 0 and 1")
    return Dataset.from_arrays(X, Y.astype(bool))


class _TopKMixin(ClassifierMixin):
    _estimator_type = "classifier"

    def predict(self, X):
        return topk_indicator(self.decision_function(X), self.k)

    def score(self, X, Y, sample_weight=None):
        """Overall recall (percent) of the top-k predictions."""
        return compute_metrics(self.predict(X), np.asarray(Y, bool), self.k).overall_recall

    def _check_X(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X


class RankingTagger(_TopKMixin, BaseEstimator):
    """MLP scorer trained with a softmax, pairwise or WARP loss.

    ``hidden=()`` gives a linear scorer.
    """

    def __init__(self, loss="warp", hidden=(256,), dropout=0.6,
                 learning_rate=0.002, momentum=0.9, batch_size=32,
                 decay_factor=0.5, decay_every=10, epochs=40, max_trials=None,
                 k=3, random_state=0):
        self.loss = loss
        self.hidden = hidden
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.decay_factor = decay_factor
        self.decay_every = decay_every
        self.epochs = epochs
        self.max_trials = max_trials
        self.k = k
        self.random_state = random_state

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, momentum=self.momentum,
            batch_size=self.batch_size, decay_factor=self.decay_factor,
            decay_every=self.decay_every, epochs=self.epochs,
            seed=self.random_state, loss_kind=self.loss,
            hidden=tuple(self.hidden), dropout_ratio=self.dropout,
            max_trials=self.max_trials)

    def fit(self, X, Y):
        data = X if isinstance(X, Dataset) else _dataset(X, Y)
        self.params_, self.log_ = train(data, self.train_config())
        self.n_features_in_ = data.dim
        self.n_tags_ = data.num_tags
        return self

    def decision_function(self, X):
        scores, _ = forward(self.params_, self._check_X(X), "eval")
        return scores


class KNNTagger(_TopKMixin, BaseEstimator):
    """Distance-weighted nearest-neighbour tag transfer."""

    def __init__(self, n_neighbors=50, sigma=1.0, k=3):
        self.n_neighbors = n_neighbors
        self.sigma = sigma
        self.k = k

    def fit(self, X, Y):
        self.train_ = X if isinstance(X, Dataset) else _dataset(X, Y)
        KnnConfig(self.n_neighbors, self.sigma)
        self.n_features_in_ = self.train_.dim
        return self

    def decision_function(self, X):
        return knn_posterior(self.train_, self._check_X(X),
                             KnnConfig(self.n_neighbors, self.sigma))


class LinearSVMTagger(_TopKMixin, BaseEstimator):
    """One-vs-all linear SVMs ranked by decision value."""

    def __init__(self, C=2.0, epochs=30, learning_rate=0.01, momentum=0.9,
                 batch_size=32, decay_factor=0.5, decay_every=10, k=3,
                 random_state=0):
        self.C = C
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.decay_factor = decay_factor
        self.decay_every = decay_every
        self.k = k
        self.random_state = random_state

    def svm_config(self) -> SvmConfig:
        return SvmConfig(C=self.C, epochs=self.epochs,
                         learning_rate=self.learning_rate, momentum=self.momentum,
                         batch_size=self.batch_size, decay_factor=self.decay_factor,
                         decay_every=self.decay_every, seed=self.random_state)

    def fit(self, X, Y):
        data = X if isinstance(X, Dataset) else _dataset(X, Y)
        self.model_ = svm_train(data, self.svm_config())
        self.n_features_in_ = data.dim
        return self

    def decision_function(self, X):
        return svm_scores(self.model_, self._check_X(X))
