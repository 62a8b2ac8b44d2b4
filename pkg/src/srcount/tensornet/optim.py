"""Stochastic gradient descent with classical and Nesterov momentum."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    learning_rate: float
    momentum: float = 0.9
    nesterov: bool = True
    batch_size: int = 64
    epochs: int = 1
    seed: int = 0
    loss: str = "categorical_cross_entropy"

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ConfigError("train.learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("train.momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("train.epochs must be >= 0")
        if self.loss != "categorical_cross_entropy":
            raise ConfigError(f"train.loss {self.loss!r} is not supported")


def sgd_step(param: np.ndarray, grad: np.ndarray, velocity: np.ndarray,
             learning_rate: float, momentum: float, nesterov: bool) -> None:
    """One in-place update: v <- mu v - lr g, then the parameter move.

    Nesterov applies the lookahead form theta <- theta + mu v - lr g;
    classical momentum applies theta <- theta + v.
    """
    velocity *= momentum
    velocity -= learning_rate * grad
    if nesterov:
        param += momentum * velocity
        param -= learning_rate * grad
    else:
        param += velocity


class SGD:
    """Holds one velocity slot per parameter and applies sgd_step to each."""

    def __init__(self, params: dict, learning_rate: float, momentum: float = 0.0,
                 nesterov: bool = False):
        self.params = params
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.nesterov = nesterov
        self.velocity = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, grads: dict) -> None:
        for name, param in self.params.items():
            sgd_step(param, grads[name], self.velocity[name],
                     self.learning_rate, self.momentum, self.nesterov)
