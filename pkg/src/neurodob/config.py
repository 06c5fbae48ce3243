"""INI configuration: one file describes vehicle, controllers, training and cases.

Sections and keys (all optional; missing keys take the defaults shown by
``neurodob --help-config``):

[vehicle]  m, iz, lf, lr, caf, car, vx_kmh, ts
[lqr]      q_diag (four comma-separated weights), r
[dob]      q_cutoff_hz
[nn]       hidden (comma-separated widths), dropout, lr, weight_decay, batch_size,
           max_epochs, plateau_factor, plateau_patience, early_stop_delta,
           early_stop_patience, val_fraction
[driver]   profile, and optional overrides preview_time, gain_ey, gain_epsi, smoothing_tau
[sim]      duration, steer_limit, epsilon1, plant (nominal|perturbed), stiffness_scale,
           mass_scale, input_bias, input_lag_tau, tire_sat_alpha,
           excitation_std, excitation_tau
[case.N]   train_map, validate_map, driver, plant
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Tuple

from .compensator import DEFAULT_EPSILON1, DEFAULT_STEER_LIMIT
from .driver import DRIVER_PROFILES, DriverParams
from .exceptions import ConfigError, NeuroDobError
from .lqr import DEFAULT_Q_DIAG, DEFAULT_R, LqrWeights
from .vehicle import KMH, PlantConfig, PlantVariant, VehicleParams, default_perturbation


@dataclass(frozen=True)
class NnSettings:
    hidden: Tuple[int, ...] = (64, 64, 64, 64)
    dropout: float = 0.2
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 64
    max_epochs: int = 2000
    plateau_factor: float = 0.5
    plateau_patience: int = 10
    early_stop_delta: float = 1e-5
    early_stop_patience: int = 50
    val_fraction: float = 0.2

    def estimator_kwargs(self):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw["hidden_layer_sizes"] = kw.pop("hidden")
        return kw


@dataclass(frozen=True)
class SimSettings:
    duration: float = 100.0
    steer_limit: float = DEFAULT_STEER_LIMIT
    epsilon1: float = DEFAULT_EPSILON1
    plant: PlantConfig = field(default_factory=default_perturbation)
    excitation_std: float = 0.01
    excitation_tau: float = 0.3


@dataclass(frozen=True)
class CaseSettings:
    train_map: str
    validate_map: str
    driver: str = "smooth"
    plant: str = "perturbed"


DEFAULT_CASES = {
    1: CaseSettings("map1", "map1"),
    2: CaseSettings("map1", "map2"),
    3: CaseSettings("map3", "map2"),
}


@dataclass(frozen=True)
class AppConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    lqr_q_diag: Tuple[float, ...] = DEFAULT_Q_DIAG
    lqr_r: float = DEFAULT_R
    dob_cutoff_hz: float = 2.0
    nn: NnSettings = field(default_factory=NnSettings)
    driver_profile: str = "smooth"
    driver_overrides: Dict[str, float] = field(default_factory=dict)
    sim: SimSettings = field(default_factory=SimSettings)
    cases: Dict[int, CaseSettings] = field(default_factory=lambda: dict(DEFAULT_CASES))

    @property
    def lqr_weights(self):
        return LqrWeights.diagonal(self.lqr_q_diag, self.lqr_r)

    def driver_params(self, profile=None):
        base = DRIVER_PROFILES[profile or self.driver_profile]
        return replace(base, **self.driver_overrides) if self.driver_overrides else base

    def plant_config(self, name="perturbed"):
        if name == PlantVariant.NOMINAL.value:
            return PlantConfig()
        return self.sim.plant


_DRIVER_KEYS = {"preview_time": "preview_time", "gain_ey": "feedback_gain_ey",
                "gain_epsi": "feedback_gain_epsi", "smoothing_tau": "smoothing_tau"}

KNOWN_KEYS = {
    "vehicle": ("m", "iz", "lf", "lr", "caf", "car", "vx_kmh", "ts"),
    "lqr": ("q_diag", "r"),
    "dob": ("q_cutoff_hz",),
    "nn": tuple(f.name for f in fields(NnSettings)),
    "driver": ("profile",) + tuple(_DRIVER_KEYS),
    "sim": ("duration", "steer_limit", "epsilon1", "plant", "stiffness_scale", "mass_scale",
            "input_bias", "input_lag_tau", "tire_sat_alpha", "excitation_std", "excitation_tau"),
    "case": ("train_map", "validate_map", "driver", "plant"),
}


def _float(section, key):
    raw = section[key]
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a number") from None
    if math.isnan(value):
        raise ConfigError(f"[{section.name}] {key} is NaN")
    return value


def _int(section, key):
    raw = section[key]
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not an integer") from None


def _floats(section, key):
    try:
        return tuple(float(v) for v in section[key].split(","))
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} must be a comma-separated list of numbers") from None


def _check_keys(section, allowed):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"[{section.name}] unknown keys: {', '.join(unknown)}")


def parse_config(text, base: AppConfig = None) -> AppConfig:
    """Parse INI text on top of ``base`` (the defaults when omitted)."""
    parser = configparser.ConfigParser(default_section="__none__")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = base or AppConfig()
    try:
        return _apply(parser, cfg)
    except ConfigError:
        raise
    except NeuroDobError as exc:
        raise ConfigError(str(exc)) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _apply(parser, cfg: AppConfig) -> AppConfig:
    for name in parser.sections():
        kind = "case" if name.startswith("case.") else name
        if kind not in KNOWN_KEYS:
            raise ConfigError(f"unknown section [{name}]")
        _check_keys(parser[name], KNOWN_KEYS[kind])

    if parser.has_section("vehicle"):
        s = parser["vehicle"]
        names = {"m": "m", "iz": "Iz", "lf": "lf", "lr": "lr", "caf": "Caf", "car": "Car", "ts": "Ts"}
        kw = {attr: _float(s, key) for key, attr in names.items() if key in s}
        if "vx_kmh" in s:
            kw["Vx"] = _float(s, "vx_kmh") * KMH
        cfg = replace(cfg, vehicle=replace(cfg.vehicle, **kw))

    if parser.has_section("lqr"):
        s = parser["lqr"]
        if "q_diag" in s:
            q = _floats(s, "q_diag")
            if len(q) != 4:
                raise ConfigError("[lqr] q_diag needs four values")
            cfg = replace(cfg, lqr_q_diag=q)
        if "r" in s:
            cfg = replace(cfg, lqr_r=_float(s, "r"))
        cfg.lqr_weights  # validates

    if parser.has_section("dob") and "q_cutoff_hz" in parser["dob"]:
        cfg = replace(cfg, dob_cutoff_hz=_float(parser["dob"], "q_cutoff_hz"))

    if parser.has_section("nn"):
        s = parser["nn"]
        kw = {}
        for f in fields(NnSettings):
            if f.name not in s:
                continue
            if f.name == "hidden":
                try:
                    kw["hidden"] = tuple(int(v) for v in s["hidden"].split(","))
                except ValueError:
                    raise ConfigError("[nn] hidden must be comma-separated integers") from None
                if not kw["hidden"] or min(kw["hidden"]) < 1:
                    raise ConfigError("[nn] hidden widths must be >= 1")
            elif f.type in (int, "int"):
                kw[f.name] = _int(s, f.name)
            else:
                kw[f.name] = _float(s, f.name)
        cfg = replace(cfg, nn=replace(cfg.nn, **kw))

    if parser.has_section("driver"):
        s = parser["driver"]
        profile = s.get("profile", cfg.driver_profile)
        if profile not in DRIVER_PROFILES:
            raise ConfigError(f"[driver] unknown profile {profile!r}")
        overrides = dict(cfg.driver_overrides)
        overrides.update({attr: _float(s, key) for key, attr in _DRIVER_KEYS.items() if key in s})
        cfg = replace(cfg, driver_profile=profile, driver_overrides=overrides)
        DriverParams(**{**DRIVER_PROFILES[profile].__dict__, **overrides})

    if parser.has_section("sim"):
        s = parser["sim"]
        kw = {k: _float(s, k) for k in ("duration", "steer_limit", "epsilon1", "excitation_std",
                                        "excitation_tau") if k in s}
        plant = cfg.sim.plant
        if "plant" in s:
            if s["plant"] not in ("nominal", "perturbed"):
                raise ConfigError("[sim] plant must be nominal or perturbed")
            plant = PlantConfig() if s["plant"] == "nominal" else default_perturbation()
        pk = {k: _float(s, k) for k in ("stiffness_scale", "mass_scale", "input_bias", "input_lag_tau",
                                        "tire_sat_alpha") if k in s}
        if pk:
            plant = replace(plant, **pk)
        sim = replace(cfg.sim, plant=plant, **kw)
        for key in ("duration", "steer_limit", "epsilon1", "excitation_tau"):
            if not getattr(sim, key) > 0:
                raise ConfigError(f"[sim] {key} must be > 0")
        if sim.excitation_std < 0:
            raise ConfigError("[sim] excitation_std must be >= 0")
        cfg = replace(cfg, sim=sim)

    cases = dict(cfg.cases)
    for name in parser.sections():
        if not name.startswith("case."):
            continue
        try:
            cid = int(name.split(".", 1)[1])
        except ValueError:
            raise ConfigError(f"case section [{name}] needs an integer id") from None
        s = parser[name]
        old = cases.get(cid)
        if old is None and not {"train_map", "validate_map"} <= set(s):
            raise ConfigError(f"[{name}] needs train_map and validate_map")
        base = old or CaseSettings(s["train_map"], s["validate_map"])
        cases[cid] = replace(base, **{k: s[k] for k in KNOWN_KEYS["case"] if k in s})
        if cases[cid].plant not in ("nominal", "perturbed"):
            raise ConfigError(f"[{name}] plant must be nominal or perturbed")
    return replace(cfg, cases=cases)


def load_config(path) -> AppConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def format_config(cfg: AppConfig) -> str:
    """Render ``cfg`` as INI text that :func:`parse_config` reads back."""
    v = cfg.vehicle
    p = cfg.sim.plant
    out = [
        "[vehicle]",
        f"m = {v.m!r}", f"iz = {v.Iz!r}", f"lf = {v.lf!r}", f"lr = {v.lr!r}",
        f"caf = {v.Caf!r}", f"car = {v.Car!r}", f"vx_kmh = {v.Vx / KMH!r}", f"ts = {v.Ts!r}",
        "",
        "[lqr]",
        "q_diag = " + ", ".join(repr(float(q)) for q in cfg.lqr_q_diag),
        f"r = {cfg.lqr_r!r}",
        "",
        "[dob]",
        f"q_cutoff_hz = {cfg.dob_cutoff_hz!r}",
        "",
        "[nn]",
    ]
    for f in fields(NnSettings):
        value = getattr(cfg.nn, f.name)
        out.append(f"{f.name} = " + (", ".join(map(str, value)) if f.name == "hidden" else repr(value)))
    out += ["", "[driver]", f"profile = {cfg.driver_profile}"]
    inverse = {attr: key for key, attr in _DRIVER_KEYS.items()}
    out += [f"{inverse[k]} = {val!r}" for k, val in sorted(cfg.driver_overrides.items())]
    out += [
        "",
        "[sim]",
        f"duration = {cfg.sim.duration!r}",
        f"steer_limit = {cfg.sim.steer_limit!r}",
        f"epsilon1 = {cfg.sim.epsilon1!r}",
        f"plant = {p.variant.value}",
        f"stiffness_scale = {p.stiffness_scale!r}",
        f"mass_scale = {p.mass_scale!r}",
        f"input_bias = {p.input_bias!r}",
        f"input_lag_tau = {p.input_lag_tau!r}",
        f"tire_sat_alpha = {p.tire_sat_alpha!r}",
        f"excitation_std = {cfg.sim.excitation_std!r}",
        f"excitation_tau = {cfg.sim.excitation_tau!r}",
    ]
    for cid, case in sorted(cfg.cases.items()):
        out += ["", f"[case.{cid}]", f"train_map = {case.train_map}", f"validate_map = {case.validate_map}",
                f"driver = {case.driver}", f"plant = {case.plant}"]
    return "\n".join(out) + "\n"
