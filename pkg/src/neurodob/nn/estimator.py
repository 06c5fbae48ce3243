from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .._rng import rng_stream
from .mlp import MlpModel
from .training import TrainConfig, fit


class MlpRegressor(BaseEstimator, RegressorMixin):
    """Scikit-learn facade over :class:`MlpModel` and :func:`fit`.

    Inputs and targets are used as given; scaling is the caller's job (see
    :class:`~neurodob.compensator.NeuroDOB`).
    """

    def __init__(self, hidden_layer_sizes=(64, 64, 64, 64), dropout=0.2, lr=1e-3,
                 weight_decay=1e-4, batch_size=64, max_epochs=2000, plateau_factor=0.5,
                 plateau_patience=10, early_stop_delta=1e-5, early_stop_patience=50,
                 val_fraction=0.2, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.dropout = dropout
        self.lr = lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.plateau_factor = plateau_factor
        self.plateau_patience = plateau_patience
        self.early_stop_delta = early_stop_delta
        self.early_stop_patience = early_stop_patience
        self.val_fraction = val_fraction
        self.random_state = random_state

    def train_config(self):
        return TrainConfig(
            lr=self.lr, weight_decay=self.weight_decay, batch_size=self.batch_size,
            max_epochs=self.max_epochs, plateau_factor=self.plateau_factor,
            plateau_patience=self.plateau_patience, early_stop_delta=self.early_stop_delta,
            early_stop_patience=self.early_stop_patience, val_fraction=self.val_fraction,
            seed=self.random_state,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        dims = [X.shape[1], *self.hidden_layer_sizes, 1]
        self.model_ = MlpModel(dims, dropout_p=self.dropout, rng=rng_stream(self.random_state, "nn.init"))
        self.report_ = fit(self.model_, X, y, self.train_config())
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        return self.model_.predict(X)
