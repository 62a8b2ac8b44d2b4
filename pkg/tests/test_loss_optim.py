import numpy as np
import pytest

from srcount.errors import ConfigError, DomainError
from srcount.tensornet import SGD, Dense, Network, ReLU, TrainConfig, sgd_step, softmax_cross_entropy


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        for c in (2, 5, 10):
            logits = np.zeros((3, c))
            targets = np.eye(c)[[0, 1, 0] if c > 1 else [0, 0, 0]]
            loss, _ = softmax_cross_entropy(logits, targets)
            assert abs(loss - np.log(c)) < 1e-12

    def test_confident_correct_logit(self):
        logits = np.zeros((1, 10))
        logits[0, 3] = 50.0
        targets = np.eye(10)[[3]]
        loss, _ = softmax_cross_entropy(logits, targets)
        assert loss < 1e-20

    def test_gradient_form(self):
        logits = np.array([[2.0, 0.0, -1.0]])
        targets = np.eye(3)[[0]]
        _, grad = softmax_cross_entropy(logits, targets)
        probs = np.exp(logits) / np.exp(logits).sum()
        assert np.allclose(grad, probs - targets)

    def test_rejects_non_one_hot(self):
        logits = np.zeros((2, 3))
        bad = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(DomainError):
            softmax_cross_entropy(logits, bad)
        with pytest.raises(DomainError):
            softmax_cross_entropy(logits, np.full((2, 3), 0.5))

    def test_large_logits_stable(self):
        logits = np.array([[1000.0, 999.0, -1000.0]])
        loss, grad = softmax_cross_entropy(logits, np.eye(3)[[1]])
        assert np.isfinite(loss)
        assert np.all(np.isfinite(grad))


class TestSgdStep:
    def test_zero_momentum_is_plain_descent(self):
        p = np.array([1.0])
        v = np.zeros(1)
        sgd_step(p, np.array([2.0]), v, 0.1, 0.0, nesterov=True)
        assert np.allclose(p, 1.0 - 0.1 * 2.0)

    def test_hand_executed_recurrence(self):
        # two steps, constant unit gradient, lr 0.1, momentum 0.9:
        # v1 = -0.1, theta1 = -0.19; v2 = -0.19, theta2 = -0.461
        p = np.zeros(1)
        v = np.zeros(1)
        for _ in range(2):
            sgd_step(p, np.ones(1), v, 0.1, 0.9, nesterov=True)
        assert abs(p[0] - (-0.461)) < 1e-12

    def test_zero_gradient_zero_velocity_no_motion(self):
        p = np.array([3.0, -1.0])
        v = np.zeros(2)
        sgd_step(p, np.zeros(2), v, 0.5, 0.9, nesterov=True)
        assert np.array_equal(p, [3.0, -1.0])

    def test_plain_momentum_differs_from_nesterov(self):
        p1, v1 = np.zeros(1), np.zeros(1)
        p2, v2 = np.zeros(1), np.zeros(1)
        sgd_step(p1, np.ones(1), v1, 0.1, 0.9, nesterov=True)
        sgd_step(p2, np.ones(1), v2, 0.1, 0.9, nesterov=False)
        assert p1[0] != p2[0]
        assert np.allclose(p2, -0.1)  # theta + v with v = -0.1


class TestSgdOptimizer:
    def test_updates_in_place(self):
        rng = np.random.default_rng(0)
        layer = Dense(4, 2, rng=rng, dtype=np.float64)
        params = layer.params()
        before = params["w"].copy()
        opt = SGD(params, 0.1, 0.9, nesterov=True)
        opt.step({"w": np.ones_like(layer.w), "b": np.ones_like(layer.b)})
        assert not np.allclose(layer.w, before)

    def test_loss_decreases_on_separable_data(self):
        rng = np.random.default_rng(1)
        net = Network([Dense(4, 16, rng=rng, dtype=np.float64), ReLU(),
                       Dense(16, 2, rng=rng, dtype=np.float64)])
        x = rng.standard_normal((32, 4))
        labels = (x[:, 0] > 0).astype(int)
        targets = np.eye(2)[labels]
        opt = SGD(net.named_params(), 0.05, 0.9, nesterov=True)
        losses = []
        for _ in range(10):
            logits = net.forward(x, train=True)
            loss, grad = softmax_cross_entropy(logits, targets)
            losses.append(loss)
            net.backward(grad)
            opt.step(net.named_grads())
        assert all(b < a for a, b in zip(losses, losses[1:]))


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.0, epochs=1)
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.1, momentum=1.0, epochs=1)
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.1, batch_size=0, epochs=1)
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.1, epochs=1, loss="mse")
