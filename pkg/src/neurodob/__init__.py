"""Lateral path-tracking workbench: bicycle-model plant, LQR, a classical
disturbance observer and a learned steering compensation trained on
driver data.
"""

from .compensator import NeuroDOB, build_dataset
from .config import AppConfig, load_config
from .driver import DRIVER_PROFILES, DriverParams
from .evaluation import CaseSpec, RmseReport, percent_change, rmse, run_case
from .exceptions import NeuroDobError
from .lqr import LqrWeights, solve_dare
from .road import RoadMap, builtin_map, builtin_maps, generate_map
from .sim import ScenarioAssets, ScenarioConfig, SimLog, collect_training_run, run_scenario
from .stability import StabilityCert, certify, solve_discrete_lyapunov
from .vehicle import PlantConfig, VehicleParams, default_perturbation, discrete_model

__all__ = [
    "AppConfig", "CaseSpec", "DRIVER_PROFILES", "DriverParams", "LqrWeights", "NeuroDOB", "NeuroDobError",
    "PlantConfig", "RmseReport", "RoadMap", "ScenarioAssets", "ScenarioConfig", "SimLog", "StabilityCert",
    "VehicleParams", "build_dataset", "builtin_map", "builtin_maps", "certify", "collect_training_run",
    "default_perturbation", "discrete_model", "generate_map", "load_config", "percent_change", "rmse",
    "run_case", "run_scenario", "solve_dare", "solve_discrete_lyapunov",
]
