"""Learning from label proportions by reduction to mutual contamination models."""

from .bags import Bag, ClassConditionals, LPDistribution, gaussian_pair, sample_lps, simulate_bags
from .exceptions import ConfigError, ContaminationError, DegeneratePairsError, LLPError
from .loss import CorrectedLoss, Loss, correct
from .model import DecisionFunction, KernelConfig
from .train import TrainConfig, train_llp

__all__ = [
    "Bag", "ClassConditionals", "LPDistribution", "gaussian_pair", "sample_lps", "simulate_bags",
    "ConfigError", "ContaminationError", "DegeneratePairsError", "LLPError",
    "CorrectedLoss", "Loss", "correct", "DecisionFunction", "KernelConfig",
    "TrainConfig", "train_llp",
]

__version__ = "0.1.0"
