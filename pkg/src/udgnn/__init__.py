"""Deep-GNN laboratory: gated residual graph networks with over-smoothing diagnostics."""

from .autodiff import Parameter, Tape, backward, grad_check
from .data import (
    NodeDataset,
    SyntheticSpec,
    generate_noisy_complete,
    generate_planted_partition,
    load_dataset,
    save_dataset,
)
from .graph import PropagationMatrix, SparseGraph, build_propagation, spmm
from .model import ModelSpec, UdgnnModel, model_forward
from .train import TrainConfig, TrainReport, adam_step, depth_sweep, evaluate, train

__all__ = [
    "Parameter",
    "Tape",
    "backward",
    "grad_check",
    "NodeDataset",
    "SyntheticSpec",
    "generate_noisy_complete",
    "generate_planted_partition",
    "load_dataset",
    "save_dataset",
    "PropagationMatrix",
    "SparseGraph",
    "build_propagation",
    "spmm",
    "ModelSpec",
    "UdgnnModel",
    "model_forward",
    "TrainConfig",
    "TrainReport",
    "adam_step",
    "depth_sweep",
    "evaluate",
    "train",
]

__version__ = "0.1.0"
