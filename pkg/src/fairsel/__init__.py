"""Fairness-aware unsupervised feature selection via centered kernel alignment."""

__version__ = "0.1.0"

from .dataset import Dataset, SyntheticSpec, generate_synthetic, load_csv
from .evaluation import EvalReport, evaluate_selection
from .fufs import FufsConfig, IndicatorPair, SelectionResult, optimize, rank_features
from .kernel import KernelSpec, centered_alignment, gram

__all__ = [
    "Dataset", "SyntheticSpec", "generate_synthetic", "load_csv",
    "EvalReport", "evaluate_selection",
    "FufsConfig", "IndicatorPair", "SelectionResult", "optimize", "rank_features",
    "KernelSpec", "centered_alignment", "gram",
]
