"""Graph disentangled networks with an HSIC channel-independence penalty."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .errors import ConfigError, IpgdnError, ShapeError, TrainingError, ValidationError
from .graphio import Graph, load_graph, normalized_adjacency, save_graph, synth_factor_graph
from .model import IpgdnModel, ModelConfig, evaluate, forward, train

__all__ = [
    "BACKEND",
    "ConfigError",
    "Graph",
    "IpgdnError",
    "IpgdnModel",
    "ModelConfig",
    "ShapeError",
    "TrainingError",
    "ValidationError",
    "evaluate",
    "forward",
    "load_graph",
    "normalized_adjacency",
    "save_graph",
    "synth_factor_graph",
    "train",
]
