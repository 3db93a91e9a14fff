"""Splits, metrics, ablation, and PPG feature analysis."""

from .features import BeatPairingError, FiducialSet, aging_index, feature_agreement, sdppg, sdppg_features
from .metrics import MetricsReport, error_histogram, mrae, mrsd, reconstruction_metrics, waveform_mrae
from .splits import Fold, SplitError, SplitPlan, make_split

__all__ = [
    "BeatPairingError", "FiducialSet", "Fold", "MetricsReport", "SplitError", "SplitPlan", "aging_index",
    "error_histogram", "feature_agreement", "make_split", "mrae", "mrsd", "reconstruction_metrics", "sdppg",
    "sdppg_features", "waveform_mrae",
]
