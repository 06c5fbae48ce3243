"""Preview steering law used as the surrogate driver.

The driver steers with the steady-state cornering angle for the curvature
it sees ``preview_time`` seconds ahead, corrects lateral error and the
deviation of the heading error from its steady-cornering value with
proportional feedback, and low-pass filters the result.  In steady
cornering the output is exactly the feedforward angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .exceptions import InvalidParameters
from .road import curvature_at


@dataclass(frozen=True)
class DriverParams:
    preview_time: float = 0.5
    feedback_gain_ey: float = 0.3
    feedback_gain_epsi: float = 1.0
    smoothing_tau: float = 0.1

    def __post_init__(self):
        if self.preview_time < 0.0:
            raise InvalidParameters("preview_time must be >= 0")
        if self.smoothing_tau < 0.0:
            raise InvalidParameters("smoothing_tau must be >= 0")


DRIVER_PROFILES = {
    "smooth": DriverParams(preview_time=0.5, feedback_gain_ey=0.3, feedback_gain_epsi=1.0, smoothing_tau=0.05),
    "aggressive": DriverParams(preview_time=0.25, feedback_gain_ey=0.5, feedback_gain_epsi=1.5, smoothing_tau=0.04),
}


def driver_profile(name, **overrides):
    try:
        base = DRIVER_PROFILES[name]
    except KeyError:
        raise InvalidParameters(f"unknown driver profile {name!r}; choose from {sorted(DRIVER_PROFILES)}") from None
    return replace(base, **overrides) if overrides else base


def feedforward_steer(kappa, vehicle):
    """Steady-state steering angle of the bicycle model on curvature ``kappa``."""
    return kappa * vehicle.wheelbase * (1.0 + vehicle.understeer_gradient * vehicle.Vx**2)


def steady_yaw_error(kappa, vehicle):
    """Yaw-angle error held by the bicycle model in steady cornering on ``kappa``.

    It is set by the vehicle's sideslip, not by the controller, so the
    heading feedback is measured relative to it.
    """
    p = vehicle
    return kappa * (p.m * p.Vx**2 * p.lf / (2.0 * p.Car * p.wheelbase) - p.lr)


def driver_command(params: DriverParams, x, road, s_now, Vx, vehicle, internal=None):
    """Return ``(delta_d, internal)``; ``internal`` is the smoothed steering angle."""
    curvature_at(road, s_now)  # range check on the current station
    s_prev = min(s_now + Vx * params.preview_time, road.total_length)
    kappa_prev = curvature_at(road, s_prev)
    xv = x.as_array() if hasattr(x, "as_array") else x
    raw = (feedforward_steer(kappa_prev, vehicle)
           - params.feedback_gain_ey * xv[0]
           - params.feedback_gain_epsi * (xv[2] - steady_yaw_error(kappa_prev, vehicle)))
    prev = 0.0 if internal is None else internal
    if params.smoothing_tau > 0.0:
        blend = 1.0 - math.exp(-vehicle.Ts / params.smoothing_tau)
        delta = prev + blend * (raw - prev)
    else:
        delta = raw
    return float(delta), float(delta)
