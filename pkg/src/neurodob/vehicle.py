"""Lateral-error bicycle model: parameters, continuous matrices, Euler
discretisation and the two plant variants used in closed loop.

State ordering is fixed everywhere: ``[e_y, e_y_dot, e_psi, e_psi_dot]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .exceptions import InvalidParameters, NonFiniteState, SingularSpeed

MIN_SPEED = 0.1
MAX_TS = 0.05
KMH = 1.0 / 3.6


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the test vehicle (SI units)."""

    m: float = 1274.0
    Iz: float = 1523.0
    lf: float = 1.016
    lr: float = 1.562
    Caf: float = 118800.0
    Car: float = 165300.0
    Vx: float = 50.0 * KMH
    Ts: float = 0.01

    def __post_init__(self):
        for name in ("m", "Iz", "lf", "lr", "Caf", "Car", "Vx", "Ts"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                if name == "Vx":
                    raise SingularSpeed(f"Vx must be > {MIN_SPEED} m/s, got {value}")
                raise InvalidParameters(f"{name} must be finite and > 0, got {value}")
        if self.Vx <= MIN_SPEED:
            raise SingularSpeed(f"Vx must be > {MIN_SPEED} m/s, got {self.Vx}")
        if self.Ts > MAX_TS:
            raise InvalidParameters(f"Ts must be <= {MAX_TS} s, got {self.Ts}")

    @property
    def wheelbase(self):
        return self.lf + self.lr

    @property
    def understeer_gradient(self):
        """K_us such that steady steering is ``L * kappa * (1 + K_us * Vx**2)``."""
        L = self.wheelbase
        return self.m / L**2 * (self.lr / (2.0 * self.Caf) - self.lf / (2.0 * self.Car))


@dataclass(frozen=True)
class ErrorState:
    e_y: float = 0.0
    e_y_dot: float = 0.0
    e_psi: float = 0.0
    e_psi_dot: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_array()):
            raise NonFiniteState(f"non-finite error state {self}")

    def as_array(self):
        return np.array([self.e_y, self.e_y_dot, self.e_psi, self.e_psi_dot], dtype=float)

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float).reshape(4)
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


@dataclass(frozen=True)
class ContinuousModel:
    A: np.ndarray
    B: np.ndarray
    B2: np.ndarray


@dataclass(frozen=True)
class DiscreteModel:
    Phi: np.ndarray
    Gamma: np.ndarray
    Gamma2: np.ndarray
    Ts: float


class PlantVariant(str, Enum):
    NOMINAL = "nominal"
    PERTURBED = "perturbed"


@dataclass(frozen=True)
class PlantConfig:
    """Plant selection plus the knobs of the unmodeled-dynamics perturbation.

    The defaults describe the nominal plant; :func:`default_perturbation`
    returns the mismatch used by the case studies.
    """

    variant: PlantVariant = PlantVariant.NOMINAL
    stiffness_scale: float = 1.0
    mass_scale: float = 1.0
    input_bias: float = 0.0
    input_lag_tau: float = 0.0
    tire_sat_alpha: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "variant", PlantVariant(self.variant))
        for name in ("stiffness_scale", "mass_scale"):
            value = getattr(self, name)
            if not 0.5 < value <= 2.0:
                raise InvalidParameters(f"{name} must lie in (0.5, 2.0], got {value}")
        if not self.input_lag_tau >= 0.0:
            raise InvalidParameters("input_lag_tau must be >= 0")
        if not self.tire_sat_alpha > 0.0:
            raise InvalidParameters("tire_sat_alpha must be > 0")
        if not math.isfinite(self.input_bias):
            raise InvalidParameters("input_bias must be finite")


def default_perturbation():
    return PlantConfig(
        variant=PlantVariant.PERTURBED,
        stiffness_scale=0.85,
        mass_scale=1.1,
        input_bias=0.002,
        input_lag_tau=0.05,
        tire_sat_alpha=0.06,
    )


@dataclass
class PlantInternalState:
    """Actuator state carried between plant steps."""

    delta_act: float = 0.0


def build_continuous(params: VehicleParams) -> ContinuousModel:
    m, Iz, lf, lr = params.m, params.Iz, params.lf, params.lr
    Caf, Car, Vx = params.Caf, params.Car, params.Vx
    if Vx <= MIN_SPEED:
        raise SingularSpeed(f"Vx must be > {MIN_SPEED} m/s, got {Vx}")

    moment = Caf * lf - Car * lr
    inertia = Caf * lf**2 + Car * lr**2

    A = np.zeros((4, 4))
    A[0, 1] = 1.0
    A[1, 1] = -2.0 * (Caf + Car) / (m * Vx)
    A[1, 2] = 2.0 * (Caf + Car) / m
    A[1, 3] = -2.0 * moment / (m * Vx)
    A[2, 3] = 1.0
    A[3, 1] = -2.0 * moment / (Iz * Vx)
    A[3, 2] = 2.0 * moment / Iz
    A[3, 3] = -2.0 * inertia / (Iz * Vx)

    B = np.zeros((4, 1))
    B[1, 0] = 2.0 * Caf / m
    B[3, 0] = 2.0 * Caf * lf / Iz

    B2 = np.zeros((4, 1))
    B2[1, 0] = -2.0 * moment / (m * Vx) - Vx
    B2[3, 0] = -2.0 * inertia / (Iz * Vx)
    return ContinuousModel(A, B, B2)


def discretize(cm: ContinuousModel, Ts: float) -> DiscreteModel:
    """Forward-Euler discretisation, ``Phi = I + Ts*A``."""
    if Ts < 0.0:
        raise InvalidParameters("Ts must be >= 0")
    return DiscreteModel(np.eye(4) + Ts * cm.A, Ts * cm.B, Ts * cm.B2, Ts)


def discrete_model(params: VehicleParams) -> DiscreteModel:
    return discretize(build_continuous(params), params.Ts)


def perturbed_params(params: VehicleParams, cfg: PlantConfig) -> VehicleParams:
    return replace(
        params,
        m=params.m * cfg.mass_scale,
        Iz=params.Iz * cfg.mass_scale,
        Caf=params.Caf * cfg.stiffness_scale,
        Car=params.Car * cfg.stiffness_scale,
    )


@dataclass(frozen=True)
class Plant:
    """A plant variant bound to its vehicle parameters.

    The nominal variant is the literal linear recursion.  The perturbed
    variant integrates the same bicycle model from tyre forces, with scaled
    mass/stiffness, a steering bias, a first-order actuator lag and
    slip-angle saturation.
    """

    params: VehicleParams
    config: PlantConfig = field(default_factory=PlantConfig)

    def __post_init__(self):
        object.__setattr__(self, "model", discrete_model(self.params))
        object.__setattr__(self, "_true", perturbed_params(self.params, self.config))

    def initial_internal(self):
        return PlantInternalState()

    def step(self, x, delta_f, psi_dot_des, internal=None):
        if internal is None:
            internal = self.initial_internal()
        return plant_step(self.model, self.config, x, delta_f, psi_dot_des, internal,
                          true_params=self._true)


def _tire_force_derivative(p: VehicleParams, x, delta, psi_dot_des, sat):
    e_y, e_y_dot, e_psi, e_psi_dot = x
    Vx = p.Vx
    lateral_vel = e_y_dot - Vx * e_psi
    yaw_rate = e_psi_dot + psi_dot_des
    alpha_f = delta - (lateral_vel + p.lf * yaw_rate) / Vx
    alpha_r = -(lateral_vel - p.lr * yaw_rate) / Vx
    if math.isfinite(sat):
        alpha_f = min(max(alpha_f, -sat), sat)
        alpha_r = min(max(alpha_r, -sat), sat)
    Fyf = 2.0 * p.Caf * alpha_f
    Fyr = 2.0 * p.Car * alpha_r
    return np.array([
        e_y_dot,
        (Fyf + Fyr) / p.m - Vx * psi_dot_des,
        e_psi_dot,
        (p.lf * Fyf - p.lr * Fyr) / p.Iz,
    ])


def plant_step(model, cfg, x, delta_f, psi_dot_des, internal, true_params=None):
    """Advance one sample.  Returns ``(x_next, internal_next)``.

    ``x`` may be an :class:`ErrorState` or a 4-vector; the result has the
    same type.  ``true_params`` is required for the perturbed variant.
    """
    as_state = isinstance(x, ErrorState)
    xv = x.as_array() if as_state else np.asarray(x, dtype=float).reshape(4)
    if not math.isfinite(delta_f):
        raise NonFiniteState(f"non-finite steering command {delta_f}")

    if cfg.variant is PlantVariant.NOMINAL:
        x_next = model.Phi @ xv + model.Gamma[:, 0] * delta_f + model.Gamma2[:, 0] * psi_dot_des
        internal_next = PlantInternalState(delta_f)
    else:
        if true_params is None:
            raise InvalidParameters("perturbed plant needs its true vehicle parameters")
        target = delta_f + cfg.input_bias
        if cfg.input_lag_tau > 0.0:
            blend = 1.0 - math.exp(-model.Ts / cfg.input_lag_tau)
            delta_act = internal.delta_act + blend * (target - internal.delta_act)
        else:
            delta_act = target
        deriv = _tire_force_derivative(true_params, xv, delta_act, psi_dot_des, cfg.tire_sat_alpha)
        x_next = xv + model.Ts * deriv
        internal_next = PlantInternalState(delta_act)

    if not np.all(np.isfinite(x_next)):
        raise NonFiniteState("plant state diverged to a non-finite value")
    if as_state:
        return ErrorState.from_array(x_next), internal_next
    return x_next, internal_next
