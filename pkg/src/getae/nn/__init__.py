"""Dense/recurrent layers with manual backpropagation, optimizers and checkpoints."""

from .checkpoint import CheckpointError, load_tensors, save_tensors
from .layers import (
    BCE_EPSILON,
    Activation,
    DenseLayerSpec,
    RecurrentKind,
    RecurrentLayerSpec,
    apply_dropout,
    binary_cross_entropy,
    binary_cross_entropy_grad,
    dense_backward,
    dense_forward,
    init_dense,
    init_recurrent,
    recurrent_backward,
    recurrent_forward,
    sigmoid,
)
from .optim import AdamState, OptimizerConfig, OptimizerKind, adam_update

__all__ = [
    "BCE_EPSILON", "Activation", "AdamState", "CheckpointError", "DenseLayerSpec", "OptimizerConfig",
    "OptimizerKind", "RecurrentKind", "RecurrentLayerSpec", "adam_update", "apply_dropout",
    "binary_cross_entropy", "binary_cross_entropy_grad", "dense_backward", "dense_forward", "init_dense",
    "init_recurrent", "load_tensors", "recurrent_backward", "recurrent_forward", "save_tensors", "sigmoid",
]
