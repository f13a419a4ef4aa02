"""Five interchangeable regression cores behind one fit/predict contract."""
from .base import FeatureLayout, FeatureRow, Kind, TrainingMatrix
from .gradcheck import gradient_check
from .model import LearnerModel, fit, forward_chain_folds, predict
from .modelio import deserialize, load, save, serialize

__all__ = [
    "FeatureLayout",
    "FeatureRow",
    "Kind",
    "LearnerModel",
    "TrainingMatrix",
    "deserialize",
    "fit",
    "forward_chain_folds",
    "gradient_check",
    "load",
    "predict",
    "save",
    "serialize",
]
