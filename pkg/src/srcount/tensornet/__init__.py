"""Minimal dense-tensor network stack with exact backpropagation.

Layers operate on real numpy arrays shaped (batch, channels, width) for
the convolutional path and (batch, features) after flattening. Everything
trains through hand-derived gradients; no autodiff framework is involved.
"""

from .initializers import xavier_uniform
from .layers import (
    AvgPool1D,
    BatchNorm1D,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool1D,
    ReLU,
    ResidualBlock,
)
from .losses import softmax_cross_entropy
from .network import Network, network_from_specs
from .optim import SGD, TrainConfig, sgd_step

__all__ = [
    "AvgPool1D",
    "BatchNorm1D",
    "Conv1D",
    "Dense",
    "Dropout",
    "Flatten",
    "Layer",
    "MaxPool1D",
    "Network",
    "ReLU",
    "ResidualBlock",
    "SGD",
    "TrainConfig",
    "network_from_specs",
    "sgd_step",
    "softmax_cross_entropy",
    "xavier_uniform",
]
