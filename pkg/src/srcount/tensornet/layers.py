"""Network layers with hand-derived forward and backward passes.

Convolutional-path tensors are channels-last, (batch, width, channels),
which keeps window gathers and per-channel broadcasts on contiguous
memory; Dense operates on (batch, features). Each layer caches whatever
its backward pass needs during forward, so backward must follow the
matching forward.
"""

import numpy as np

from ..errors import DomainError, ShapeError
from .initializers import xavier_uniform


class Layer:
    """Base layer: parameter-free and stateless unless overridden."""

    def params(self) -> dict:
        return {}

    def grads(self) -> dict:
        return {}

    def buffers(self) -> dict:
        """Non-trained state that still belongs in a checkpoint."""
        return {}

    def spec(self) -> dict:
        raise NotImplementedError

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _window_view(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """View (B, W, C) as (B, W_out, kernel, C) sliding windows."""
    b, w, c = x.shape
    w_out = (w - kernel) // stride + 1
    s0, s1, s2 = x.strides
    return np.lib.stride_tricks.as_strided(
        x, (b, w_out, kernel, c), (s0, s1 * stride, s1, s2))


class Conv1D(Layer):
    """Cross-correlation over the width axis.

    Weights are stored (kernel, in_channels, out_channels) so the unfolded
    input windows multiply them as a single matmul.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 stride: int = 1, padding: int = 0, rng=None, dtype=np.float32):
        if kernel < 1 or stride < 1 or padding < 0:
            raise DomainError("kernel and stride must be >= 1, padding >= 0")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        if rng is not None:
            fans = xavier_uniform((out_channels, in_channels, kernel), rng, dtype)
            self.w = np.ascontiguousarray(fans.transpose(2, 1, 0))
        else:
            self.w = np.zeros((kernel, in_channels, out_channels), dtype=dtype)
        self.b = np.zeros(out_channels, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cols = None
        self._in_width = None

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}

    def spec(self):
        return {"kind": "conv1d", "in_channels": self.in_channels,
                "out_channels": self.out_channels, "kernel": self.kernel,
                "stride": self.stride, "padding": self.padding}

    def out_width(self, width: int) -> int:
        return (width + 2 * self.padding - self.kernel) // self.stride + 1

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeError(
                f"expected (batch, width, {self.in_channels}), got {x.shape}")
        width = x.shape[1]
        if width + 2 * self.padding < self.kernel:
            raise ShapeError(f"width {width} too small for kernel {self.kernel}")
        if self.padding:
            x = np.pad(x, ((0, 0), (self.padding, self.padding), (0, 0)))
        windows = _window_view(x, self.kernel, self.stride)
        b, w_out = windows.shape[:2]
        cols = np.ascontiguousarray(windows).reshape(
            b * w_out, self.kernel * self.in_channels)
        self._cols = cols
        self._in_width = width
        out = cols @ self.w.reshape(-1, self.out_channels)
        out += self.b
        return out.reshape(b, w_out, self.out_channels)

    def backward(self, grad):
        if self._cols is None:
            raise ShapeError("backward called before forward")
        b, w_out, _ = grad.shape
        g = grad.reshape(b * w_out, self.out_channels)
        self.dw[...] = (self._cols.T @ g).reshape(self.dw.shape)
        self.db[...] = g.sum(axis=0)
        dcols = (g @ self.w.reshape(-1, self.out_channels).T).reshape(
            b, w_out, self.kernel, self.in_channels)
        wp = self._in_width + 2 * self.padding
        dx = np.zeros((b, wp, self.in_channels), dtype=grad.dtype)
        for t in range(self.kernel):
            dx[:, t:t + w_out * self.stride:self.stride, :] += dcols[:, :, t, :]
        if self.padding:
            dx = dx[:, self.padding:self.padding + self._in_width, :]
        return dx


class BatchNorm1D(Layer):
    """Per-channel normalization over batch and width."""

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1,
                 dtype=np.float32):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.dgamma = np.zeros_like(self.gamma)
        self.dbeta = np.zeros_like(self.beta)
        self._xhat = None
        self._inv_std = None
        self._train_mode = False

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.dgamma, "beta": self.dbeta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def spec(self):
        return {"kind": "batchnorm", "channels": self.channels,
                "eps": self.eps, "momentum": self.momentum}

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self.channels:
            raise ShapeError(f"expected (batch, width, {self.channels}), got {x.shape}")
        self._train_mode = train
        if train:
            if x.shape[0] < 2:
                raise DomainError("batch norm needs batch size >= 2 in train mode")
            flat = x.reshape(-1, self.channels)
            m = flat.shape[0]
            mean = flat.sum(axis=0) / m
            centered = x - mean
            cflat = centered.reshape(-1, self.channels)
            var = np.einsum("ij,ij->j", cflat, cflat) / m
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (var - self.running_var)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            centered *= inv_std
            xhat = centered
            self._xhat = xhat
            self._inv_std = inv_std
            return self.gamma * xhat + self.beta
        # Inference folds the whole affine into one multiply-add.
        inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
        scale = self.gamma * inv_std
        self._scale = scale
        self._x_infer = x
        out = x * scale
        out += self.beta - self.running_mean * scale
        return out

    def backward(self, grad):
        if not self._train_mode:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (self._x_infer - self.running_mean) * inv_std
            gflat = grad.reshape(-1, self.channels)
            self.dgamma[...] = np.einsum("ij,ij->j", gflat,
                                         xhat.reshape(-1, self.channels))
            self.dbeta[...] = gflat.sum(axis=0)
            return grad * self._scale
        xhat = self._xhat
        gflat = grad.reshape(-1, self.channels)
        self.dgamma[...] = np.einsum("ij,ij->j", gflat,
                                     xhat.reshape(-1, self.channels))
        self.dbeta[...] = gflat.sum(axis=0)
        m = gflat.shape[0]
        dx = grad * self.gamma
        dx -= (self.dbeta * self.gamma) / m
        dx -= xhat * ((self.dgamma * self.gamma) / m)
        dx *= self._inv_std
        return dx


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def spec(self):
        return {"kind": "relu"}

    def forward(self, x, train=False):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad):
        return grad * self._mask


class MaxPool1D(Layer):
    """Non-overlapping max pooling over the width axis (stride = width)."""

    def __init__(self, width: int = 2):
        if width < 2:
            raise DomainError("pool width must be >= 2")
        self.width = width
        self._arg = None
        self._in_shape = None

    def spec(self):
        return {"kind": "maxpool", "width": self.width}

    def out_width(self, width: int) -> int:
        return (width - self.width) // self.width + 1

    def forward(self, x, train=False):
        b, w, c = x.shape
        w_out = self.out_width(w)
        if w_out < 1:
            raise ShapeError(f"width {w} too small for pool width {self.width}")
        windows = x[:, :w_out * self.width, :].reshape(b, w_out, self.width, c)
        self._in_shape = x.shape
        if self.width == 2:
            first, second = windows[:, :, 0, :], windows[:, :, 1, :]
            self._arg = first >= second  # ties go to the earlier position
            return np.maximum(first, second)
        self._arg = windows.argmax(axis=2)
        return windows.max(axis=2)

    def backward(self, grad):
        b, w, c = self._in_shape
        w_out = grad.shape[1]
        dwin = np.zeros((b, w_out, self.width, c), dtype=grad.dtype)
        if self.width == 2:
            dwin[:, :, 0, :] = grad * self._arg
            dwin[:, :, 1, :] = grad * ~self._arg
        else:
            np.put_along_axis(dwin, self._arg[:, :, None, :], grad[:, :, None, :],
                              axis=2)
        dx = np.zeros((b, w, c), dtype=grad.dtype)
        dx[:, :w_out * self.width, :] = dwin.reshape(b, w_out * self.width, c)
        return dx


class AvgPool1D(Layer):
    """Average pooling; ``width=None`` averages the whole axis away.

    Global mode emits (batch, channels) ready for a dense head.
    """

    def __init__(self, width=None):
        if width is not None and width < 2:
            raise DomainError("pool width must be >= 2 (or None for global)")
        self.width = width
        self._in_shape = None

    def spec(self):
        return {"kind": "avgpool", "width": self.width}

    def out_width(self, width: int):
        if self.width is None:
            return None
        return (width - self.width) // self.width + 1

    def forward(self, x, train=False):
        self._in_shape = x.shape
        b, w, c = x.shape
        if self.width is None:
            return x.mean(axis=1)
        w_out = self.out_width(w)
        if w_out < 1:
            raise ShapeError(f"width {w} too small for pool width {self.width}")
        return x[:, :w_out * self.width, :].reshape(b, w_out, self.width, c).mean(axis=2)

    def backward(self, grad):
        b, w, c = self._in_shape
        if self.width is None:
            return np.broadcast_to(grad[:, None, :] / w, (b, w, c)).astype(grad.dtype)
        w_out = grad.shape[1]
        dx = np.zeros((b, w, c), dtype=grad.dtype)
        spread = np.repeat(grad / self.width, self.width, axis=1)
        dx[:, :w_out * self.width, :] = spread
        return dx


class Dropout(Layer):
    """Inverted dropout: survivors scaled by 1/(1-rate) in train mode."""

    def __init__(self, rate: float, rng=None):
        if not 0.0 <= rate < 1.0:
            raise DomainError(f"drop rate {rate} outside [0, 1)")
        self.rate = rate
        self.rng = rng
        self._mask = None

    def spec(self):
        return {"kind": "dropout", "rate": self.rate}

    def forward(self, x, train=False):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if self.rng is None:
            raise DomainError("dropout needs an RNG in train mode")
        keep = 1.0 - self.rate
        draw_dtype = x.dtype if x.dtype in (np.float32, np.float64) else np.float64
        uniforms = self.rng.random(x.shape, dtype=draw_dtype)
        self._mask = (uniforms >= self.rate).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, rng=None,
                 dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        shape = (in_features, out_features)
        self.w = (xavier_uniform(shape, rng, dtype) if rng is not None
                  else np.zeros(shape, dtype=dtype))
        self.b = np.zeros(out_features, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}

    def spec(self):
        return {"kind": "dense", "in_features": self.in_features,
                "out_features": self.out_features}

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"expected (batch, {self.in_features}), got {x.shape}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad):
        self.dw[...] = self._x.T @ grad
        self.db[...] = grad.sum(axis=0)
        return grad @ self.w.T


class Flatten(Layer):
    def __init__(self):
        self._in_shape = None

    def spec(self):
        return {"kind": "flatten"}

    def forward(self, x, train=False):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._in_shape)


class ResidualBlock(Layer):
    """Basic two-conv residual block: y = relu(F(x) + shortcut(x)).

    F is conv-bn-relu-conv-bn; the shortcut is the identity unless the
    block changes channels or stride, in which case a width-1 strided
    projection convolution (plus batch norm) must be enabled.
    """

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1,
                 projection=None, rng=None, dtype=np.float32):
        needs = in_channels != out_channels or stride != 1
        if projection is None:
            projection = needs
        if needs and not projection:
            raise ShapeError("dimension change requires the projection shortcut")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.projection = projection
        self.conv1 = Conv1D(in_channels, out_channels, 3, stride, 1, rng, dtype)
        self.bn1 = BatchNorm1D(out_channels, dtype=dtype)
        self.relu1 = ReLU()
        self.conv2 = Conv1D(out_channels, out_channels, 3, 1, 1, rng, dtype)
        self.bn2 = BatchNorm1D(out_channels, dtype=dtype)
        if projection:
            self.proj_conv = Conv1D(in_channels, out_channels, 1, stride, 0, rng, dtype)
            self.proj_bn = BatchNorm1D(out_channels, dtype=dtype)
        self.relu_out = ReLU()

    def _sublayers(self):
        subs = [("conv1", self.conv1), ("bn1", self.bn1), ("conv2", self.conv2),
                ("bn2", self.bn2)]
        if self.projection:
            subs += [("proj_conv", self.proj_conv), ("proj_bn", self.proj_bn)]
        return subs

    def params(self):
        return {f"{name}.{k}": v for name, sub in self._sublayers()
                for k, v in sub.params().items()}

    def grads(self):
        return {f"{name}.{k}": v for name, sub in self._sublayers()
                for k, v in sub.grads().items()}

    def buffers(self):
        return {f"{name}.{k}": v for name, sub in self._sublayers()
                for k, v in sub.buffers().items()}

    def spec(self):
        return {"kind": "residual_block", "in_channels": self.in_channels,
                "out_channels": self.out_channels, "stride": self.stride,
                "projection": self.projection}

    def out_width(self, width: int) -> int:
        return self.conv1.out_width(width)

    def forward(self, x, train=False):
        h = self.conv1.forward(x, train)
        h = self.bn1.forward(h, train)
        h = self.relu1.forward(h, train)
        h = self.conv2.forward(h, train)
        h = self.bn2.forward(h, train)
        if self.projection:
            shortcut = self.proj_bn.forward(self.proj_conv.forward(x, train), train)
        else:
            shortcut = x
        return self.relu_out.forward(h + shortcut, train)

    def backward(self, grad):
        g = self.relu_out.backward(grad)
        gb = self.bn2.backward(g)
        gb = self.conv2.backward(gb)
        gb = self.relu1.backward(gb)
        gb = self.bn1.backward(gb)
        gb = self.conv1.backward(gb)
        if self.projection:
            gs = self.proj_conv.backward(self.proj_bn.backward(g))
        else:
            gs = g
        return gb + gs
