"""Sequential container tying layers into one trainable stack."""

import numpy as np

from ..errors import ConfigError, ShapeError
from .layers import (
    AvgPool1D,
    BatchNorm1D,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    MaxPool1D,
    ReLU,
    ResidualBlock,
)


class Network:
    """Ordered layer stack with flat, name-addressed parameters."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def _collect(self, getter) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, value in getter(layer).items():
                out[f"{i}.{key}"] = value
        return out

    def named_params(self) -> dict:
        return self._collect(lambda l: l.params())

    def named_grads(self) -> dict:
        return self._collect(lambda l: l.grads())

    def named_state(self) -> dict:
        """Parameters plus buffers: everything a checkpoint must carry."""
        state = self._collect(lambda l: l.params())
        state.update(self._collect(lambda l: l.buffers()))
        return state

    def state_snapshot(self) -> dict:
        return {name: arr.copy() for name, arr in self.named_state().items()}

    def load_state(self, state: dict) -> None:
        own = self.named_state()
        if set(own) != set(state):
            missing = set(own) ^ set(state)
            raise ShapeError(f"state names do not match network: {sorted(missing)}")
        for name, arr in own.items():
            src = state[name]
            if arr.shape != src.shape:
                raise ShapeError(f"tensor {name}: shape {src.shape} != {arr.shape}")
            arr[...] = src

    def specs(self) -> list:
        return [layer.spec() for layer in self.layers]

    def param_count(self) -> int:
        return sum(p.size for p in self.named_params().values())

    def dropout_layers(self):
        found = []
        for layer in self.layers:
            if isinstance(layer, Dropout):
                found.append(layer)
        return found


def network_from_specs(specs, rng=None, dtype=np.float32) -> Network:
    """Rebuild a network from layer spec dicts (as stored in checkpoints).

    With ``rng=None`` weight tensors start at zero, ready to be overwritten
    by loaded state.
    """
    layers = []
    for spec in specs:
        kind = spec.get("kind")
        if kind == "conv1d":
            layers.append(Conv1D(spec["in_channels"], spec["out_channels"],
                                 spec["kernel"], spec["stride"], spec["padding"],
                                 rng, dtype))
        elif kind == "batchnorm":
            layers.append(BatchNorm1D(spec["channels"], spec["eps"],
                                      spec["momentum"], dtype))
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "maxpool":
            layers.append(MaxPool1D(spec["width"]))
        elif kind == "avgpool":
            layers.append(AvgPool1D(spec["width"]))
        elif kind == "dropout":
            layers.append(Dropout(spec["rate"]))
        elif kind == "dense":
            layers.append(Dense(spec["in_features"], spec["out_features"], rng, dtype))
        elif kind == "flatten":
            layers.append(Flatten())
        elif kind == "residual_block":
            layers.append(ResidualBlock(spec["in_channels"], spec["out_channels"],
                                        spec["stride"], spec["projection"], rng, dtype))
        else:
            raise ConfigError(f"unknown layer kind {kind!r}")
    return Network(layers)
