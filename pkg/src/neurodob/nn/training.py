"""Adam, plateau learning-rate reduction and early stopping around MlpModel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .._rng import rng_stream
from ..exceptions import EmptyDataset, InvalidParameters, NonFiniteGradient
from .mlp import TRAIN


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def backward_and_step(model, X, y, optimizer, weight_decay=0.0, dropout_rng=None):
    """One Adam step on ``mean((f(X) - y)**2) + weight_decay * sum ||W||^2``.

    Batch-norm running statistics are refreshed from this batch.  Returns
    the value of the objective before the step.
    """
    if model.mode != TRAIN:
        raise InvalidParameters("backward_and_step needs the model in train mode")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    if X.shape[0] == 0:
        raise EmptyDataset("empty batch")

    out, cache = model.forward_batch(X, batch_stats=True, dropout_rng=dropout_rng, update_running=True)
    err = out - y
    n = X.shape[0]
    params = model.parameters()
    grads = model.backward(cache, 2.0 * err / n)
    penalty = 0.0
    if weight_decay:
        for k, (p, is_w) in enumerate(zip(params, model.is_weight())):
            if is_w:
                penalty += float(np.sum(p * p))
                grads[k] = grads[k] + 2.0 * weight_decay * p
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NonFiniteGradient("non-finite gradient")
    optimizer.step(params, grads)
    return float(np.mean(err * err)) + weight_decay * penalty


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 64
    max_epochs: int = 2000
    plateau_factor: float = 0.5
    plateau_patience: int = 10
    early_stop_delta: float = 1e-5
    early_stop_patience: int = 50
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("lr", "batch_size", "max_epochs", "plateau_factor", "plateau_patience",
                     "early_stop_delta", "early_stop_patience"):
            if not getattr(self, name) > 0:
                raise InvalidParameters(f"{name} must be > 0")
        if self.weight_decay < 0:
            raise InvalidParameters("weight_decay must be >= 0")
        if not 0.0 < self.val_fraction <= 0.5:
            raise InvalidParameters("val_fraction must lie in (0, 0.5]")


@dataclass
class TrainReport:
    epochs_run: int = 0
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    lr_trace: List[float] = field(default_factory=list)
    best_val_loss: float = float("inf")
    best_epoch: int = -1
    stop_reason: str = "MaxEpochs"


def temporal_split(n, val_fraction):
    """Index of the first validation sample: the last ``val_fraction`` is held out."""
    n_val = max(1, int(round(n * val_fraction)))
    return n - n_val


def mse(model, X, y):
    pred = model.predict(X)
    return float(np.mean((pred - np.asarray(y, dtype=float).reshape(-1)) ** 2))


def fit(model, X, y, config: TrainConfig):
    """Train in place and restore the parameters of the best validation epoch.

    The validation set is the trailing ``val_fraction`` of the rows, which
    are assumed to be in time order.  Mini-batch order and dropout masks are
    drawn from the ``nn.shuffle`` and ``nn.dropout`` streams of
    ``config.seed``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] == 0:
        raise EmptyDataset("no training samples")
    if X.shape[0] != y.shape[0]:
        raise InvalidParameters("X and y row counts differ")
    cut = temporal_split(X.shape[0], config.val_fraction)
    X_tr, y_tr, X_val, y_val = X[:cut], y[:cut], X[cut:], y[cut:]
    if X_tr.shape[0] < 2:
        raise EmptyDataset("too few training samples after the validation split")

    shuffle_rng = rng_stream(config.seed, "nn.shuffle")
    dropout_rng = rng_stream(config.seed, "nn.dropout")
    opt = Adam(model.parameters(), lr=config.lr)
    report = TrainReport()
    best_model = model.copy()
    plateau_best = np.inf
    plateau_bad = 0
    stop_best = np.inf
    stop_bad = 0

    n = X_tr.shape[0]
    bs = min(config.batch_size, n)
    for epoch in range(config.max_epochs):
        model.train()
        order = shuffle_rng.permutation(n)
        losses = []
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            if idx.size < 2:  # batch norm needs two samples
                continue
            losses.append(backward_and_step(model, X_tr[idx], y_tr[idx], opt,
                                            config.weight_decay, dropout_rng))
        model.eval()
        val = mse(model, X_val, y_val)
        report.train_loss.append(float(np.mean(losses)))
        report.val_loss.append(val)
        report.lr_trace.append(opt.lr)
        report.epochs_run = epoch + 1

        if val < report.best_val_loss:
            report.best_val_loss = val
            report.best_epoch = epoch
            best_model = model.copy()

        if val < plateau_best:
            plateau_best = val
            plateau_bad = 0
        else:
            plateau_bad += 1
            if plateau_bad >= config.plateau_patience:
                opt.lr *= config.plateau_factor
                plateau_bad = 0

        if val < stop_best - config.early_stop_delta:
            stop_best = val
            stop_bad = 0
        else:
            stop_bad += 1
            if stop_bad >= config.early_stop_patience:
                report.stop_reason = "EarlyStop"
                break

    model.__dict__.update(best_model.__dict__)
    model.eval()
    return report
