from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import DegenerateFeature


class Standardizer(BaseEstimator, TransformerMixin):
    """Per-column z-scoring with population (1/N) standard deviation.

    Columns listed in ``allow_constant`` get a unit scale when they have
    zero spread; any other constant column raises :class:`DegenerateFeature`.
    """

    def __init__(self, allow_constant=()):
        self.allow_constant = allow_constant

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_samples=1)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        for j in np.flatnonzero(std == 0.0):
            if j not in tuple(self.allow_constant):
                raise DegenerateFeature(f"column {j} has zero standard deviation")
            std[j] = 1.0
        self.mean_ = mean
        self.scale_ = std
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = np.asarray(X, dtype=float)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "mean_")
        X = np.asarray(X, dtype=float)
        return X * self.scale_ + self.mean_

    @classmethod
    def from_stats(cls, mean, scale, allow_constant=()):
        std = cls(allow_constant=allow_constant)
        std.mean_ = np.asarray(mean, dtype=float)
        std.scale_ = np.asarray(scale, dtype=float)
        std.n_features_in_ = std.mean_.size
        return std


def standardize(std: Standardizer, value):
    return std.transform(value)


def destandardize(std: Standardizer, value):
    return std.inverse_transform(value)
