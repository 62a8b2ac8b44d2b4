"""Forward-pass contracts, checked against nested-loop reference kernels."""

import numpy as np
import pytest

from srcount.errors import DomainError, ShapeError
from srcount.tensornet import (
    AvgPool1D,
    BatchNorm1D,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    MaxPool1D,
    ReLU,
    ResidualBlock,
    xavier_uniform,
)


def conv1d_reference(x, w, b, stride, padding):
    """Brute-force cross-correlation; x (B, W, C_in), w (k, C_in, C_out)."""
    batch, width, c_in = x.shape
    kernel, _, c_out = w.shape
    xp = np.zeros((batch, width + 2 * padding, c_in), dtype=x.dtype)
    xp[:, padding:padding + width, :] = x
    w_out = (width + 2 * padding - kernel) // stride + 1
    out = np.zeros((batch, w_out, c_out), dtype=x.dtype)
    for n in range(batch):
        for i in range(w_out):
            for o in range(c_out):
                acc = b[o]
                for t in range(kernel):
                    for c in range(c_in):
                        acc += xp[n, i * stride + t, c] * w[t, c, o]
                out[n, i, o] = acc
    return out


def dense_reference(x, w, b):
    batch, n_in = x.shape
    n_out = w.shape[1]
    out = np.zeros((batch, n_out), dtype=x.dtype)
    for n in range(batch):
        for o in range(n_out):
            acc = b[o]
            for i in range(n_in):
                acc += x[n, i] * w[i, o]
            out[n, o] = acc
    return out


def maxpool_reference(x, width):
    batch, w, c = x.shape
    w_out = (w - width) // width + 1
    out = np.empty((batch, w_out, c), dtype=x.dtype)
    for n in range(batch):
        for i in range(w_out):
            for ch in range(c):
                out[n, i, ch] = max(x[n, i * width + t, ch] for t in range(width))
    return out


def avgpool_reference(x, width):
    batch, w, c = x.shape
    if width is None:
        return x.mean(axis=1)
    w_out = (w - width) // width + 1
    out = np.empty((batch, w_out, c), dtype=x.dtype)
    for n in range(batch):
        for i in range(w_out):
            for ch in range(c):
                out[n, i, ch] = sum(x[n, i * width + t, ch]
                                    for t in range(width)) / width
    return out


class TestConv1D:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        conv = Conv1D(1, 1, 3, 1, 1, dtype=np.float64)
        conv.w[1, 0, 0] = 1.0  # kernel [0, 1, 0]
        x = rng.standard_normal((4, 16, 1))
        assert np.allclose(conv.forward(x), x)

    def test_zero_weights_constant_bias(self):
        conv = Conv1D(3, 2, 3, 1, 1, dtype=np.float64)
        conv.b[:] = [1.5, -2.0]
        x = np.random.default_rng(1).standard_normal((2, 10, 3))
        out = conv.forward(x)
        assert np.allclose(out[..., 0], 1.5)
        assert np.allclose(out[..., 1], -2.0)

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_reference(self, seed):
        rng = np.random.default_rng(seed)
        c_in = int(rng.integers(1, 4))
        c_out = int(rng.integers(1, 5))
        kernel = int(rng.integers(1, 6))
        stride = int(rng.integers(1, 3))
        padding = int(rng.integers(0, 3))
        width = int(rng.integers(kernel, 20))
        conv = Conv1D(c_in, c_out, kernel, stride, padding, rng=rng,
                      dtype=np.float64)
        conv.b[:] = rng.standard_normal(c_out)
        x = rng.standard_normal((3, width, c_in))
        ref = conv1d_reference(x, conv.w, conv.b, stride, padding)
        assert np.allclose(conv.forward(x), ref, atol=1e-12)

    def test_output_width_formula(self):
        conv = Conv1D(1, 1, 7, 2, 3)
        assert conv.out_width(110) == (110 + 6 - 7) // 2 + 1 == 55

    def test_kernel_wider_than_input_rejected(self):
        conv = Conv1D(1, 1, 5, 1, 0)
        with pytest.raises(ShapeError):
            conv.forward(np.zeros((1, 3, 1), dtype=np.float32))

    def test_channel_mismatch_rejected(self):
        conv = Conv1D(2, 1, 3, 1, 1)
        with pytest.raises(ShapeError):
            conv.forward(np.zeros((1, 8, 3), dtype=np.float32))


class TestDense:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_reference(self, seed):
        rng = np.random.default_rng(seed)
        n_in = int(rng.integers(1, 20))
        n_out = int(rng.integers(1, 10))
        layer = Dense(n_in, n_out, rng=rng, dtype=np.float64)
        layer.b[:] = rng.standard_normal(n_out)
        x = rng.standard_normal((5, n_in))
        assert np.allclose(layer.forward(x), dense_reference(x, layer.w, layer.b),
                           atol=1e-12)


class TestPools:
    def test_maxpool_doc_example(self):
        pool = MaxPool1D(2)
        x = np.array([1.0, 3.0, 2.0, 0.0]).reshape(1, 4, 1)
        assert np.allclose(pool.forward(x).ravel(), [3.0, 2.0])

    @pytest.mark.parametrize("seed", range(8))
    def test_maxpool_matches_reference(self, seed):
        rng = np.random.default_rng(seed)
        width = int(rng.integers(2, 5))
        w = int(rng.integers(width, 21))
        x = rng.standard_normal((3, w, int(rng.integers(1, 5))))
        pool = MaxPool1D(width)
        assert np.allclose(pool.forward(x), maxpool_reference(x, width))

    @pytest.mark.parametrize("seed", range(8))
    def test_avgpool_matches_reference(self, seed):
        rng = np.random.default_rng(seed)
        width = [None, 2, 3, 4][seed % 4]
        w = int(rng.integers(4, 21))
        x = rng.standard_normal((3, w, int(rng.integers(1, 5))))
        pool = AvgPool1D(width)
        assert np.allclose(pool.forward(x), avgpool_reference(x, width), atol=1e-12)

    def test_odd_width_tail_dropped(self):
        pool = MaxPool1D(2)
        x = np.arange(7.0).reshape(1, 7, 1)
        assert pool.forward(x).shape == (1, 3, 1)


class TestReLU:
    def test_doc_example(self):
        layer = ReLU()
        out = layer.forward(np.array([[-1.0, 0.0, 2.0]]))
        assert np.allclose(out, [[0.0, 0.0, 2.0]])


class TestBatchNorm:
    def test_constant_input_maps_to_beta(self):
        bn = BatchNorm1D(3, dtype=np.float64)
        x = np.full((4, 5, 3), 7.0)
        out = bn.forward(x, train=True)
        assert np.allclose(out, 0.0, atol=1e-6)

    def test_train_mode_standardizes(self):
        rng = np.random.default_rng(2)
        bn = BatchNorm1D(4, dtype=np.float64)
        x = 3.0 + 2.5 * rng.standard_normal((16, 9, 4))
        out = bn.forward(x, train=True)
        assert np.abs(out.mean(axis=(0, 1))).max() < 1e-9
        assert np.abs(out.var(axis=(0, 1)) - 1.0).max() < 1e-4

    def test_batch_of_one_rejected_in_train(self):
        bn = BatchNorm1D(2)
        with pytest.raises(DomainError):
            bn.forward(np.zeros((1, 8, 2), dtype=np.float32), train=True)

    def test_infer_uses_running_stats(self):
        rng = np.random.default_rng(3)
        bn = BatchNorm1D(2, dtype=np.float64)
        for _ in range(200):
            bn.forward(5.0 + rng.standard_normal((8, 4, 2)), train=True)
        x = 5.0 + rng.standard_normal((8, 4, 2))
        out = bn.forward(x, train=False)
        assert np.abs(out.mean()) < 0.2


class TestDropout:
    def test_zero_rate_identity(self):
        layer = Dropout(0.0, rng=np.random.default_rng(0))
        x = np.random.default_rng(1).standard_normal((4, 6, 2))
        assert np.array_equal(layer.forward(x, train=True), x)
        assert np.array_equal(layer.forward(x, train=False), x)

    def test_infer_mode_identity(self):
        layer = Dropout(0.6, rng=np.random.default_rng(0))
        x = np.random.default_rng(1).standard_normal((4, 6, 2))
        assert np.array_equal(layer.forward(x, train=False), x)

    def test_survivors_scaled(self):
        layer = Dropout(0.4, rng=np.random.default_rng(0))
        x = np.ones((64, 10, 8), dtype=np.float64)
        out = layer.forward(x, train=True)
        kept = out[out != 0]
        assert np.allclose(kept, 1.0 / 0.6)
        assert abs((out != 0).mean() - 0.6) < 0.05

    def test_rate_bounds(self):
        with pytest.raises(DomainError):
            Dropout(1.0)


class TestResidualBlock:
    def test_zero_branch_identity(self):
        rng = np.random.default_rng(4)
        block = ResidualBlock(3, 3, 1, rng=rng, dtype=np.float64)
        for conv in (block.conv1, block.conv2):
            conv.w[...] = 0.0
            conv.b[...] = 0.0
        x = np.abs(rng.standard_normal((4, 10, 3)))  # non-negative input
        out = block.forward(x, train=False)
        # F(x) = 0 and beta = 0 shortcut, so relu(x) = x
        assert np.allclose(out, x, atol=1e-6)

    def test_projection_required_on_channel_change(self):
        with pytest.raises(ShapeError):
            ResidualBlock(3, 5, 1, projection=False)

    def test_projection_output_shape(self):
        rng = np.random.default_rng(5)
        block = ResidualBlock(3, 6, 2, rng=rng, dtype=np.float64)
        out = block.forward(rng.standard_normal((2, 11, 3)), train=False)
        assert out.shape == (2, 6, 6)

    def test_width_formula(self):
        block = ResidualBlock(4, 8, 2, rng=np.random.default_rng(0))
        assert block.out_width(7) == 4


class TestXavier:
    def test_bounds_never_exceeded(self):
        rng = np.random.default_rng(6)
        w = xavier_uniform((40, 60), rng)
        bound = np.sqrt(6.0 / 100.0)
        assert np.abs(w).max() <= bound

    def test_variance_matches(self):
        rng = np.random.default_rng(7)
        w = xavier_uniform((1000, 1000), rng, dtype=np.float64)
        target = 2.0 / 2000.0
        assert abs(w.var() - target) / target < 0.05

    def test_deterministic_under_seed(self):
        a = xavier_uniform((8, 8), np.random.default_rng(11))
        b = xavier_uniform((8, 8), np.random.default_rng(11))
        assert np.array_equal(a, b)

    def test_conv_shape_fans(self):
        rng = np.random.default_rng(8)
        w = xavier_uniform((64, 32, 3), rng, dtype=np.float64)
        bound = np.sqrt(6.0 / (32 * 3 + 64 * 3))
        assert np.abs(w).max() <= bound


class TestFlatten:
    def test_round_trip(self):
        layer = Flatten()
        x = np.random.default_rng(9).standard_normal((3, 4, 5))
        flat = layer.forward(x)
        assert flat.shape == (3, 20)
        assert np.array_equal(layer.backward(flat), x)
