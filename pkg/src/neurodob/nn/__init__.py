from .estimator import MlpRegressor
from .mlp import EVAL, TRAIN, MlpModel
from .scaling import Standardizer, destandardize, standardize
from .training import Adam, TrainConfig, TrainReport, backward_and_step, fit

__all__ = [
    "Adam", "EVAL", "MlpModel", "MlpRegressor", "Standardizer", "TRAIN", "TrainConfig",
    "TrainReport", "backward_and_step", "destandardize", "fit", "standardize",
]
