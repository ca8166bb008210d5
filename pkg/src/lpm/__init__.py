"""Phase-native sequence models with unitary DFT token mixing, a dense
attention baseline, and the training/benchmark harness around them."""

from .attention import AttentionModel, AttnConfig
from .data import GenSpec, make_benchmark
from .phasor import LpmConfig, PhasorModel, count_params, lpm_forward
from .training import TrainConfig, rollout, train

__version__ = "0.1.0"

__all__ = [
    "AttentionModel", "AttnConfig", "GenSpec", "LpmConfig", "PhasorModel", "TrainConfig",
    "count_params", "lpm_forward", "make_benchmark", "rollout", "train",
]
