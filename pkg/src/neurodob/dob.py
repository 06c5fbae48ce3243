"""Conventional model-based disturbance observer with a first-order Q-filter.

The one-step residual between the measured state and the nominal
prediction is reduced to an input-equivalent scalar by least squares
against the nominal input column, then low-pass filtered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidParameters

DEFAULT_CUTOFF_HZ = 2.0


@dataclass(frozen=True, eq=False)
class DobDesign:
    Phi_n: np.ndarray
    Gamma_n: np.ndarray
    Ts: float
    q_cutoff_hz: float = DEFAULT_CUTOFF_HZ
    C_n: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        nyquist = 0.5 / self.Ts
        if not 0.0 < self.q_cutoff_hz < nyquist:
            raise InvalidParameters(f"q_cutoff_hz must lie in (0, {nyquist}) Hz")
        for name in ("Phi_n", "Gamma_n", "C_n"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidParameters(f"{name} must be finite")

    @classmethod
    def from_model(cls, model, q_cutoff_hz=DEFAULT_CUTOFF_HZ):
        return cls(model.Phi.copy(), model.Gamma.reshape(-1).copy(), model.Ts, q_cutoff_hz)

    @property
    def time_constant(self):
        return 1.0 / (2.0 * math.pi * self.q_cutoff_hz)

    @property
    def filter_gain(self):
        return 1.0 - math.exp(-self.Ts / self.time_constant)

    @property
    def projector(self):
        """Row vector mapping an output residual to the input channel."""
        g = self.C_n @ self.Gamma_n
        return g / float(g @ g)


@dataclass(frozen=True)
class DobState:
    x_prev: Optional[np.ndarray] = None
    u_prev: float = 0.0
    d_hat: float = 0.0


def dob_update(design: DobDesign, state: DobState, y, u_applied):
    """Fold in measurement ``y = x[k]`` and ``u_applied = u[k-1]``.

    ``u_applied`` is the command that moved the plant from the previously
    stored measurement to ``y``.  The first call has no history and returns
    ``d_hat = 0``.
    """
    yv = y.as_array() if hasattr(y, "as_array") else np.asarray(y, dtype=float)
    u_applied = float(u_applied)
    if state.x_prev is None:
        d_hat = 0.0
    else:
        predicted = design.C_n @ (design.Phi_n @ state.x_prev + design.Gamma_n * u_applied)
        d_raw = float(design.projector @ (yv - predicted))
        d_hat = state.d_hat + design.filter_gain * (d_raw - state.d_hat)
    return DobState(yv.copy(), u_applied, d_hat), d_hat


def dob_compensate(u_nominal, d_hat):
    return u_nominal - d_hat
