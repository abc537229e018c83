"""Offline recognition of the 20 Geez numeral symbols (U+1369..U+137C).

The functional modules (``imaging``, ``dataset``, ``synthgen``, ``network``,
``optimizer``, ``training``, ``evaluation``) carry the pipeline; the
``estimators`` module wraps them in scikit-learn compatible classes.
"""
from .dataset import ClassId, Dataset, load_dataset, split_per_class
from .errors import GeezError
from .evaluation import evaluate, overall_report, predict
from .imaging import preprocess
from .network import Architecture, NetworkParams
from .optimizer import CgConfig, cg_minimize
from .synthgen import PerturbationConfig, generate_dataset
from .training import TrainConfig, TrainedModel, load_model, save_model, train

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "CgConfig",
    "ClassId",
    "Dataset",
    "GeezError",
    "NetworkParams",
    "PerturbationConfig",
    "TrainConfig",
    "TrainedModel",
    "cg_minimize",
    "evaluate",
    "generate_dataset",
    "load_dataset",
    "load_model",
    "overall_report",
    "predict",
    "preprocess",
    "save_model",
    "split_per_class",
    "train",
]
