"""Twin-PPG synthesis models and the vitals estimator."""

from .mlp import DctMlp, Mlp, MlpSpec, mlp_features
from .persist import load_trained, parameter_counts, save_trained
from .train import (MODEL_KINDS, DivergenceError, TrainConfig, TrainResult, build_model, model_inputs,
                    model_targets, predict, train)
from .unet import (MultiResRefine, MultiResSpec, UnetApprox, UnetCascade, UnetSpec, level_lengths,
                   level_targets)
from .vitals import VitalsCnn, VitalsCnnSpec

__all__ = [
    "DctMlp", "DivergenceError", "MODEL_KINDS", "Mlp", "MlpSpec", "MultiResRefine", "MultiResSpec",
    "TrainConfig", "TrainResult", "UnetApprox", "UnetCascade", "UnetSpec", "VitalsCnn", "VitalsCnnSpec",
    "build_model", "level_lengths", "level_targets", "load_trained", "mlp_features", "model_inputs",
    "model_targets", "parameter_counts", "predict", "save_trained", "train",
]
