"""Learned steering compensator trained on driver-minus-LQR residuals.

Feature order is fixed: ``[e_y, e_y_dot, e_psi, e_psi_dot, delta_lqr]``.
The label of a logged step is ``delta_d - delta_lqr`` of that same step.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._rng import rng_stream
from .exceptions import (EmptyAfterFiltering, EmptyDataset, InvalidParameters,
                         MisalignedLog)
from .nn.mlp import MlpModel
from .nn.scaling import Standardizer
from .nn.training import TrainConfig, fit

FEATURES = ("e_y", "e_y_dot", "e_psi", "e_psi_dot", "delta_lqr")
DATASET_COLUMNS = ("t_s",) + FEATURES + ("delta_d",)
CHECKPOINT_MAGIC = "neurodob-ckpt v1"
OUTLIER_SIGMA = 6.0
DEFAULT_EPSILON1 = 0.1
DEFAULT_STEER_LIMIT = 0.6


@dataclass(frozen=True)
class FeatureVector:
    e_y: float
    e_y_dot: float
    e_psi: float
    e_psi_dot: float
    delta_lqr: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_array()):
            raise InvalidParameters("feature vector must be finite")

    def as_array(self):
        return np.array([self.e_y, self.e_y_dot, self.e_psi, self.e_psi_dot, self.delta_lqr])

    @classmethod
    def from_state(cls, x, delta_lqr):
        xv = x.as_array() if hasattr(x, "as_array") else np.asarray(x, dtype=float)
        return cls(float(xv[0]), float(xv[1]), float(xv[2]), float(xv[3]), float(delta_lqr))


@dataclass(frozen=True)
class CompensationLimits:
    epsilon1: float = DEFAULT_EPSILON1

    def __post_init__(self):
        if not self.epsilon1 > 0.0:
            raise InvalidParameters("epsilon1 must be > 0")


@dataclass
class TrainingDataset:
    t: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    dropped: int = 0

    def __len__(self):
        return self.labels.size

    def extend(self, other):
        """Concatenate two datasets (e.g. several collection runs)."""
        return TrainingDataset(
            np.concatenate([self.t, other.t]),
            np.vstack([self.features, other.features]),
            np.concatenate([self.labels, other.labels]),
            self.dropped + other.dropped,
        )


def _columns(log):
    if hasattr(log, "column"):
        return {name: np.asarray(log.column(name), dtype=float) for name in DATASET_COLUMNS}
    missing = [c for c in DATASET_COLUMNS if c not in log]
    if missing:
        raise MisalignedLog(f"log is missing columns {missing}")
    return {name: np.asarray(log[name], dtype=float).reshape(-1) for name in DATASET_COLUMNS}


def build_dataset(log, outlier_sigma=OUTLIER_SIGMA):
    """One sample per logged step; labels beyond ``outlier_sigma`` are dropped.

    ``log`` is a :class:`~neurodob.sim.SimLog` or any mapping with the
    dataset columns.
    """
    cols = _columns(log)
    n = cols["t_s"].size
    if any(c.size != n for c in cols.values()):
        raise MisalignedLog("log columns have different lengths")
    if n == 0:
        raise EmptyAfterFiltering("log has no rows")
    if np.any(np.diff(cols["t_s"]) <= 0.0):
        raise MisalignedLog("timestamps must increase strictly")
    table = np.column_stack([cols[c] for c in DATASET_COLUMNS])
    if not np.all(np.isfinite(table)):
        raise MisalignedLog("log contains non-finite values")

    features = np.column_stack([cols[c] for c in FEATURES])
    labels = cols["delta_d"] - cols["delta_lqr"]
    spread = labels.std()
    keep = np.abs(labels - labels.mean()) <= outlier_sigma * spread
    if not np.any(keep):
        raise EmptyAfterFiltering("every sample was rejected as an outlier")
    return TrainingDataset(cols["t_s"][keep], features[keep], labels[keep], int(n - keep.sum()))


def _fill_forward(values):
    """Zero-order hold over missing entries; leading gaps stay NaN."""
    out = values.copy()
    last = np.nan
    for i, v in enumerate(out):
        if math.isnan(v):
            out[i] = last
        else:
            last = v
    return out


def read_dataset_csv(path):
    """Read the dataset CSV into a column mapping.

    Empty cells (a slower channel that was not refreshed on this row) are
    held from the previous row; rows before every column has reported once
    are discarded.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in DATASET_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise MisalignedLog(f"{path}: missing columns {missing}")
        rows = list(reader)
    cols = {}
    for name in DATASET_COLUMNS:
        raw = [r[name].strip() if r[name] is not None else "" for r in rows]
        cols[name] = _fill_forward(np.array([float(v) if v not in ("", "nan", "NaN") else np.nan for v in raw]))
    if not rows:
        return {name: np.zeros(0) for name in DATASET_COLUMNS}
    valid = ~np.any(np.isnan(np.column_stack([cols[c] for c in DATASET_COLUMNS])), axis=1)
    return {name: col[valid] for name, col in cols.items()}


def format_dataset_csv(columns, extra=()):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(DATASET_COLUMNS) + list(extra)
    writer.writerow(names)
    n = len(columns["t_s"])
    for i in range(n):
        writer.writerow([repr(float(columns[c][i])) for c in names])
    return buf.getvalue()


def final_command(delta_lqr, delta_c, steer_limit=DEFAULT_STEER_LIMIT):
    total = delta_lqr + delta_c
    return float(min(max(total, -steer_limit), steer_limit))


def compensate(model: MlpModel, std: Standardizer, limits: CompensationLimits, features):
    """Clamped compensation for one feature vector; ``std`` covers 5 features + label."""
    s = features.as_array() if hasattr(features, "as_array") else np.asarray(features, dtype=float)
    z = (s - std.mean_[:5]) / std.scale_[:5]
    raw = model.forward(z) * std.scale_[5] + std.mean_[5]
    eps = limits.epsilon1
    return float(min(max(raw, -eps), eps))


def train_neurodob(dataset, train_cfg: TrainConfig, hidden=(64, 64, 64, 64), dropout=0.2):
    """Fit the joint standardiser and the network; returns ``(model, std, report)``."""
    if len(dataset) == 0:
        raise EmptyDataset("empty training dataset")
    table = np.column_stack([dataset.features, dataset.labels])
    std = Standardizer(allow_constant=(5,)).fit(table)
    scaled = std.transform(table)
    model = MlpModel([dataset.features.shape[1], *hidden, 1], dropout_p=dropout,
                     rng=rng_stream(train_cfg.seed, "nn.init"))
    report = fit(model, scaled[:, :5], scaled[:, 5], train_cfg)
    return model.eval(), std, report


class NeuroDOB(BaseEstimator, RegressorMixin):
    """Estimator mapping feature rows to a bounded steering compensation.

    ``fit(X, y)`` takes feature rows in :data:`FEATURES` order and labels
    ``delta_d - delta_lqr``; ``predict`` returns ``delta_c`` clamped to
    ``+-epsilon1``.
    """

    def __init__(self, hidden_layer_sizes=(64, 64, 64, 64), dropout=0.2, epsilon1=DEFAULT_EPSILON1,
                 lr=1e-3, weight_decay=1e-4, batch_size=64, max_epochs=2000, plateau_factor=0.5,
                 plateau_patience=10, early_stop_delta=1e-5, early_stop_patience=50,
                 val_fraction=0.2, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.dropout = dropout
        self.epsilon1 = epsilon1
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

    @property
    def limits(self):
        return CompensationLimits(self.epsilon1)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if X.shape[1] != len(FEATURES):
            raise InvalidParameters(f"expected {len(FEATURES)} features, got {X.shape[1]}")
        data = TrainingDataset(np.arange(X.shape[0], dtype=float), X, y)
        self.model_, self.standardizer_, self.report_ = train_neurodob(
            data, self.train_config(), tuple(self.hidden_layer_sizes), self.dropout)
        self.n_features_in_ = X.shape[1]
        return self

    def fit_dataset(self, dataset: TrainingDataset):
        return self.fit(dataset.features, dataset.labels)

    def predict_raw(self, X):
        """Destandardised network output before the clamp."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        std = self.standardizer_
        z = (X - std.mean_[:5]) / std.scale_[:5]
        return self.model_.predict(z) * std.scale_[5] + std.mean_[5]

    def predict(self, X):
        return np.clip(self.predict_raw(X), -self.epsilon1, self.epsilon1)

    def compensate(self, features):
        check_is_fitted(self, "model_")
        return compensate(self.model_, self.standardizer_, self.limits, features)

    @classmethod
    def from_parts(cls, model, standardizer, epsilon1=DEFAULT_EPSILON1):
        est = cls(hidden_layer_sizes=tuple(model.layer_dims[1:-1]), epsilon1=epsilon1)
        est.model_ = model.eval()
        est.standardizer_ = standardizer
        est.n_features_in_ = model.layer_dims[0]
        return est

    def save(self, path):
        check_is_fitted(self, "model_")
        Path(path).write_text(format_checkpoint(self.model_, self.standardizer_),
                              encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path, epsilon1=DEFAULT_EPSILON1):
        model, std = parse_checkpoint(Path(path).read_text(encoding="utf-8"))
        return cls.from_parts(model, std, epsilon1)


def _fmt(values):
    return " ".join(f"{float(v):.17g}" for v in np.ravel(values))


def format_checkpoint(model: MlpModel, std: Standardizer):
    lines = [CHECKPOINT_MAGIC, " ".join(str(d) for d in model.layer_dims)]
    for W, b in zip(model.weights, model.biases):
        lines += [_fmt(W), _fmt(b)]
    for i in range(model.n_hidden):
        lines += [_fmt(model.bn_scale[i]), _fmt(model.bn_shift[i]),
                  _fmt(model.running_mean[i]), _fmt(model.running_var[i])]
    lines += [_fmt(std.mean_), _fmt(std.scale_)]
    return "\n".join(lines) + "\n"


def parse_checkpoint(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise InvalidParameters("not a neurodob checkpoint")
    dims = [int(t) for t in lines[1].split()]
    n_layers = len(dims) - 1
    n_hidden = n_layers - 1
    expected = 2 + 2 * n_layers + 4 * n_hidden + 2
    if len(lines) != expected:
        raise InvalidParameters(f"checkpoint has {len(lines)} lines, expected {expected}")

    def vec(line, size):
        values = np.array([float(t) for t in line.split()]) if line.strip() else np.zeros(0)
        if values.size != size:
            raise InvalidParameters(f"checkpoint line has {values.size} values, expected {size}")
        return values

    model = MlpModel(dims, dropout_p=0.0)
    row = 2
    for i in range(n_layers):
        model.weights[i] = vec(lines[row], dims[i + 1] * dims[i]).reshape(dims[i + 1], dims[i])
        model.biases[i] = vec(lines[row + 1], dims[i + 1])
        row += 2
    for i in range(n_hidden):
        h = dims[i + 1]
        model.bn_scale[i] = vec(lines[row], h)
        model.bn_shift[i] = vec(lines[row + 1], h)
        model.running_mean[i] = vec(lines[row + 2], h)
        model.running_var[i] = vec(lines[row + 3], h)
        row += 4
    n_cols = dims[0] + dims[-1]
    std = Standardizer.from_stats(vec(lines[row], n_cols), vec(lines[row + 1], n_cols), allow_constant=(5,))
    return model.eval(), std
