"""Two-branch fake news detection: post text plus propagation-graph node embeddings."""

from .model import GetaeConfig, GetaeModel, NodeModel, Sample, assemble, load_model, predict, save_model, train
from .nn.layers import RecurrentKind

__all__ = [
    "GetaeConfig",
    "GetaeModel",
    "NodeModel",
    "RecurrentKind",
    "Sample",
    "assemble",
    "load_model",
    "predict",
    "save_model",
    "train",
]
__version__ = "0.1.0"
