"""Closed-loop runs of the lateral-error plant along a road map.

Controller stacks:

* ``driver``        the surrogate driver steers; LQR runs as a shadow.
* ``lqr``           baseline state feedback.
* ``lqr_dob``       LQR with the conventional disturbance observer.
* ``lqr_neurodob``  LQR plus the learned compensation.

The driver law is evaluated on every run so its steering can serve as
the reference trace; only the ``driver`` stack applies it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from ._rng import rng_stream
from .compensator import DEFAULT_STEER_LIMIT, format_dataset_csv
from .dob import DobDesign, DobState, dob_update
from .driver import DriverParams, driver_command
from .exceptions import DivergedState, InvalidParameters, NonFiniteState
from .lqr import LqrDesign
from .road import RoadMap, curvature_at
from .vehicle import ErrorState, Plant, PlantConfig, VehicleParams

STACKS = ("driver", "lqr", "lqr_dob", "lqr_neurodob")
DIVERGENCE_EY = 10.0
LOG_COLUMNS = ("t_s", "station_m", "kappa", "psi_dot_des", "e_y", "e_y_dot", "e_psi", "e_psi_dot",
               "delta_lqr", "delta_c", "delta_f", "delta_d", "d_hat", "steer_clamped")
CSV_EXTRA = ("kappa", "psi_dot_des", "delta_c", "delta_f", "d_hat")


@dataclass(frozen=True)
class ScenarioConfig:
    map_name: str
    stack: str = "lqr"
    duration: float = 100.0
    plant: PlantConfig = field(default_factory=PlantConfig)
    driver_profile: str = "smooth"
    seed: int = 0
    initial_state: ErrorState = field(default_factory=ErrorState)
    steer_limit: float = DEFAULT_STEER_LIMIT

    def __post_init__(self):
        if self.stack not in STACKS:
            raise InvalidParameters(f"unknown stack {self.stack!r}; choose from {STACKS}")
        if not self.duration > 0.0:
            raise InvalidParameters("duration must be > 0")


@dataclass
class ScenarioAssets:
    vehicle: VehicleParams
    lqr: LqrDesign
    road: RoadMap
    driver: DriverParams
    compensator: Optional[object] = None
    dob: Optional[DobDesign] = None
    input_disturbance: Optional[np.ndarray] = None


class SequenceCompensator:
    """Replays a precomputed compensation sequence, one value per step."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.k = 0

    def compensate(self, features):
        value = float(self.values[self.k])
        self.k += 1
        return value


class ZeroCompensator:
    def compensate(self, features):
        return 0.0


@dataclass
class SimLog:
    columns: dict
    metadata: dict
    diverged: bool = False

    def column(self, name):
        return self.columns[name]

    def __len__(self):
        return len(self.columns["t_s"])

    def states(self):
        return np.column_stack([self.columns[c] for c in ("e_y", "e_y_dot", "e_psi", "e_psi_dot")])

    def to_csv(self):
        return format_dataset_csv(self.columns, CSV_EXTRA)

    def metadata_text(self):
        return json.dumps(self.metadata, indent=2, sort_keys=True) + "\n"

    def save(self, path):
        """Write ``path`` (CSV) and ``path`` with suffix ``.meta.json``."""
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8", newline="\n")
        path.with_suffix(".meta.json").write_text(self.metadata_text(), encoding="utf-8", newline="\n")


def params_hash(vehicle, lqr, plant, driver):
    payload = json.dumps({
        "vehicle": asdict(vehicle),
        "K": [float(v).hex() for v in lqr.K.ravel()],
        "plant": {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(plant).items()},
        "driver": asdict(driver),
    }, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _finalise(rows, cfg, assets, n_steps, diverged):
    data = np.array(rows, dtype=float).reshape(-1, len(LOG_COLUMNS))
    columns = {name: data[:, j] for j, name in enumerate(LOG_COLUMNS)}
    meta = {
        "map": assets.road.name,
        "stack": cfg.stack,
        "duration_s": cfg.duration,
        "Ts": assets.vehicle.Ts,
        "Vx": assets.vehicle.Vx,
        "steps_planned": n_steps,
        "steps_logged": len(rows),
        "seed": cfg.seed,
        "driver_profile": cfg.driver_profile,
        "plant": {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(cfg.plant).items()},
        "params_hash": params_hash(assets.vehicle, assets.lqr, cfg.plant, assets.driver),
        "steer_clamped_rows": int(columns["steer_clamped"].sum()),
        "diverged": diverged,
    }
    return SimLog(columns, meta, diverged)


def run_scenario(cfg: ScenarioConfig, assets: ScenarioAssets) -> SimLog:
    vehicle, road = assets.vehicle, assets.road
    Ts, Vx = vehicle.Ts, vehicle.Vx
    n_steps = int(round(cfg.duration / Ts))
    if Vx * Ts * (n_steps - 1) > road.total_length + 1e-9:
        raise InvalidParameters(
            f"map {road.name!r} ({road.total_length:.1f} m) is shorter than {cfg.duration} s at {Vx:.3f} m/s")
    if cfg.stack == "lqr_neurodob" and assets.compensator is None:
        raise InvalidParameters("the lqr_neurodob stack needs a compensator")
    if cfg.stack == "lqr_dob" and assets.dob is None:
        raise InvalidParameters("the lqr_dob stack needs a DOB design")
    disturbance = assets.input_disturbance
    if disturbance is not None and len(disturbance) < n_steps:
        raise InvalidParameters("input disturbance shorter than the run")

    plant = Plant(vehicle, cfg.plant)
    K = assets.lqr.K[0]
    x = cfg.initial_state.as_array()
    internal = plant.initial_internal()
    drv_state = None
    dob_state = DobState()
    u_prev = 0.0
    limit = cfg.steer_limit
    rows = []

    for k in range(n_steps):
        t = k * Ts
        s = Vx * t
        kappa = curvature_at(road, s)
        psi_dot_des = Vx * kappa
        delta_lqr = -float(K @ x)
        delta_d, drv_state = driver_command(assets.driver, x, road, s, Vx, vehicle, drv_state)
        delta_c = 0.0
        d_hat = 0.0
        if cfg.stack == "driver":
            raw = delta_d
        elif cfg.stack == "lqr":
            raw = delta_lqr
        elif cfg.stack == "lqr_dob":
            dob_state, d_hat = dob_update(assets.dob, dob_state, x, u_prev)
            raw = delta_lqr - d_hat
        else:
            delta_c = assets.compensator.compensate(
                np.array([x[0], x[1], x[2], x[3], delta_lqr]))
            raw = delta_lqr + delta_c
        delta_f = min(max(raw, -limit), limit)
        rows.append((t, s, kappa, psi_dot_des, x[0], x[1], x[2], x[3], delta_lqr, delta_c,
                     delta_f, delta_d, d_hat, float(delta_f != raw)))

        u = delta_f if disturbance is None else delta_f + float(disturbance[k])
        u_prev = delta_f
        try:
            x, internal = plant.step(x, u, psi_dot_des, internal)
        except NonFiniteState as exc:
            raise DivergedState(str(exc), _finalise(rows, cfg, assets, n_steps, True)) from exc
        if abs(x[0]) > DIVERGENCE_EY:
            raise DivergedState(f"|e_y| exceeded {DIVERGENCE_EY} m at t={t + Ts:.2f} s",
                                _finalise(rows, cfg, assets, n_steps, True))

    return _finalise(rows, cfg, assets, n_steps, False)


def excitation_signal(n_steps, std, tau, Ts, rng):
    """First-order low-pass filtered Gaussian noise with stationary std ``std``.

    The filter state starts at zero.
    """
    if std < 0 or tau <= 0:
        raise InvalidParameters("excitation needs std >= 0 and tau > 0")
    a = 1.0 - math.exp(-Ts / tau)
    white = rng.standard_normal(n_steps) * std * math.sqrt((2.0 - a) / a)
    return lfilter([a], [1.0, a - 1.0], white)


def collect_training_run(road, driver_profile, plant_cfg, assets, duration=100.0, seed=0,
                         excitation_std=0.0, excitation_tau=0.3):
    """Driver-in-the-loop run with the LQR logged as a passive shadow.

    With ``excitation_std > 0`` a seeded low-pass steering disturbance
    (stream ``collect.excitation``) is added at the plant input, standing
    in for road and wind irregularities.  The logged ``delta_d`` stays the
    driver's own command, so labels are unaffected; the disturbance only
    widens the set of states the driver is seen correcting.
    """
    cfg = ScenarioConfig(road.name, "driver", duration, plant_cfg, driver_profile, seed)
    disturbance = None
    if excitation_std > 0.0:
        n_steps = int(round(duration / assets.vehicle.Ts))
        disturbance = excitation_signal(n_steps, excitation_std, excitation_tau, assets.vehicle.Ts,
                                        rng_stream(seed, "collect.excitation"))
    local = ScenarioAssets(assets.vehicle, assets.lqr, road, assets.driver, input_disturbance=disturbance)
    log = run_scenario(cfg, local)
    log.metadata["excitation_std"] = excitation_std
    log.metadata["excitation_tau"] = excitation_tau
    return log


def replay_open_loop(log: SimLog, vehicle, plant_cfg, initial_state=None):
    """Apply the logged ``delta_f`` column open loop; returns the state trajectory."""
    plant = Plant(vehicle, plant_cfg)
    x = (initial_state or ErrorState()).as_array()
    internal = plant.initial_internal()
    states = [x]
    for u, psi in zip(log.column("delta_f")[:-1], log.column("psi_dot_des")[:-1]):
        x, internal = plant.step(x, float(u), float(psi), internal)
        states.append(x)
    return np.array(states)


def max_station(vehicle, duration):
    return vehicle.Vx * vehicle.Ts * (int(round(duration / vehicle.Ts)) - 1)


def required_length(vehicle, duration, preview_time=0.0):
    return max_station(vehicle, duration) + vehicle.Vx * preview_time

