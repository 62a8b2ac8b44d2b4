"""Weight initialization."""

import numpy as np

from ..errors import ShapeError


def fan_in_out(shape) -> tuple:
    """Fan-in/fan-out of a dense (in, out) or conv (out, in, kernel) shape."""
    if len(shape) == 2:
        return shape[0], shape[1]
    if len(shape) == 3:
        out_ch, in_ch, kernel = shape
        return in_ch * kernel, out_ch * kernel
    raise ShapeError(f"no fan convention for shape {shape}")


def xavier_uniform(shape, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """Uniform samples on +-sqrt(6 / (fan_in + fan_out)).

    Keeps the activation variance roughly constant layer to layer; the
    resulting entries have variance 2 / (fan_in + fan_out).
    """
    fan_in, fan_out = fan_in_out(shape)
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
