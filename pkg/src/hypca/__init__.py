"""Hybrid parallel-fusion / cascaded attention blocks on a self-contained
float64 autodiff core, with a toy multimodal network and experiment harness."""

from .core.tensor import Parameter, Tape, Tensor, no_tape
from .network import HypcaNet, ModelConfig, Switches
from .train import ExperimentConfig, TrainConfig, count_params_macs, train
from .data import DatasetSpec, SyntheticDataset

__version__ = "0.1.0"

__all__ = [
    "Tensor", "Parameter", "Tape", "no_tape",
    "HypcaNet", "ModelConfig", "Switches",
    "ExperimentConfig", "TrainConfig", "train", "count_params_macs",
    "DatasetSpec", "SyntheticDataset",
    "__version__",
]
