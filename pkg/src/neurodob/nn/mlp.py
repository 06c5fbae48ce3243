"""Feedforward network with affine -> batch-norm -> tanh -> dropout hidden
layers and a plain affine output layer, with hand-written backprop.

Weights follow the ``z = W h + b`` convention, so ``W`` of layer ``l`` has
shape ``(dims[l+1], dims[l])``.  Batches are row-major ``(n, features)``.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidParameters, NonFiniteActivation

TRAIN = "train"
EVAL = "eval"


class MlpModel:
    """Parameter container plus forward/backward passes.

    Parameters
    ----------
    layer_dims : sequence of int
        ``[n_in, hidden..., n_out]``.
    dropout_p : float
        Drop probability used in train mode (inverted dropout).
    bn_momentum : float
        Weight of the current batch in the running mean/variance.
    bn_eps : float
        Added to the variance before normalising.
    rng : numpy Generator, optional
        Source for the uniform Glorot initialisation.
    """

    def __init__(self, layer_dims, dropout_p=0.2, bn_momentum=0.1, bn_eps=1e-8, rng=None):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or min(dims) < 1:
            raise InvalidParameters(f"invalid layer dims {layer_dims}")
        if not 0.0 <= dropout_p < 1.0:
            raise InvalidParameters("dropout_p must lie in [0, 1)")
        self.layer_dims = dims
        self.dropout_p = float(dropout_p)
        self.bn_momentum = float(bn_momentum)
        self.bn_eps = float(bn_eps)
        self.mode = TRAIN

        rng = np.random.default_rng(0) if rng is None else rng
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))
        hidden = dims[1:-1]
        self.bn_scale = [np.ones(h) for h in hidden]
        self.bn_shift = [np.zeros(h) for h in hidden]
        self.running_mean = [np.zeros(h) for h in hidden]
        self.running_var = [np.ones(h) for h in hidden]

    @property
    def n_hidden(self):
        return len(self.layer_dims) - 2

    def train(self):
        self.mode = TRAIN
        return self

    def eval(self):
        self.mode = EVAL
        return self

    def parameters(self):
        """Trainable arrays in a fixed order: per layer W, b, then BN scale, shift."""
        params = []
        for i in range(len(self.weights)):
            params += [self.weights[i], self.biases[i]]
            if i < self.n_hidden:
                params += [self.bn_scale[i], self.bn_shift[i]]
        return params

    def is_weight(self):
        """Mask over :meth:`parameters` marking the entries subject to weight decay."""
        flags = []
        for i in range(len(self.weights)):
            flags += [True, False]
            if i < self.n_hidden:
                flags += [False, False]
        return flags

    def copy(self):
        clone = MlpModel.__new__(MlpModel)
        clone.__dict__.update(self.__dict__)
        for name in ("weights", "biases", "bn_scale", "bn_shift", "running_mean", "running_var"):
            setattr(clone, name, [a.copy() for a in getattr(self, name)])
        return clone

    def forward_batch(self, X, batch_stats=None, dropout_rng=None, update_running=False):
        """Run the network on a batch; returns ``(output, cache)``.

        ``batch_stats`` selects batch statistics (train) or running
        statistics (eval) for batch norm and defaults from ``self.mode``.
        Dropout is applied only when ``dropout_rng`` is given.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if batch_stats is None:
            batch_stats = self.mode == TRAIN
        keep = 1.0 - self.dropout_p
        cache = {"inputs": [], "xhat": [], "inv_std": [], "act": [], "mask": [], "batch_stats": batch_stats}

        h = X
        for i in range(self.n_hidden):
            cache["inputs"].append(h)
            z = h @ self.weights[i].T + self.biases[i]
            if batch_stats:
                mu = z.mean(axis=0)
                var = z.var(axis=0)
                if update_running:
                    m = self.bn_momentum
                    self.running_mean[i] = (1.0 - m) * self.running_mean[i] + m * mu
                    self.running_var[i] = (1.0 - m) * self.running_var[i] + m * var
            else:
                mu = self.running_mean[i]
                var = self.running_var[i]
            inv_std = 1.0 / np.sqrt(var + self.bn_eps)
            xhat = (z - mu) * inv_std
            a = np.tanh(self.bn_scale[i] * xhat + self.bn_shift[i])
            cache["xhat"].append(xhat)
            cache["inv_std"].append(inv_std)
            cache["act"].append(a)
            if dropout_rng is not None and self.dropout_p > 0.0:
                mask = (dropout_rng.random(a.shape) < keep) / keep
                a = a * mask
            else:
                mask = None
            cache["mask"].append(mask)
            h = a

        cache["inputs"].append(h)
        out = h @ self.weights[-1].T + self.biases[-1]
        if not np.all(np.isfinite(out)):
            raise NonFiniteActivation("network output is not finite")
        return out, cache

    def backward(self, cache, d_out):
        """Gradients of a loss w.r.t. :meth:`parameters` given ``dL/d output``."""
        d_out = np.asarray(d_out, dtype=float)
        grads_rev = []
        h = cache["inputs"][-1]
        grads_rev += [d_out.sum(axis=0), d_out.T @ h]  # reversed: b, W
        dh = d_out @ self.weights[-1]

        for i in reversed(range(self.n_hidden)):
            mask = cache["mask"][i]
            if mask is not None:
                dh = dh * mask
            a = cache["act"][i]
            dy = dh * (1.0 - a * a)
            xhat = cache["xhat"][i]
            d_shift = dy.sum(axis=0)
            d_scale = (dy * xhat).sum(axis=0)
            dxhat = dy * self.bn_scale[i]
            inv_std = cache["inv_std"][i]
            if cache["batch_stats"]:
                n = dxhat.shape[0]
                dz = (inv_std / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
            else:
                dz = dxhat * inv_std
            h_in = cache["inputs"][i]
            grads_rev += [d_shift, d_scale, dz.sum(axis=0), dz.T @ h_in]
            dh = dz @ self.weights[i]
        return grads_rev[::-1]

    def predict(self, X):
        """Eval-mode outputs as a flat array, regardless of the current mode."""
        out, _ = self.forward_batch(X, batch_stats=False)
        return out[:, 0] if out.shape[1] == 1 else out

    def forward(self, s):
        """Scalar output for a single input vector in the current mode (no dropout)."""
        out, _ = self.forward_batch(np.asarray(s, dtype=float)[None, :])
        return float(out[0, 0])
