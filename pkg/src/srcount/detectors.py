"""Learned source-count detectors and their end-to-end pipelines.

Two architectures over the same covariance features: a five-layer stacked
CNN and a deeper residual network, both emitting one logit per candidate
source count. Inference wraps the full frame-to-label pipeline, with or
without spatial smoothing.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .array_model import Frame
from .covariance import autocorrelation, extract_features, fbss
from .errors import ConfigError, DataError, DivergenceError
from .tensornet import (
    SGD,
    AvgPool1D,
    BatchNorm1D,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    MaxPool1D,
    Network,
    ReLU,
    ResidualBlock,
    TrainConfig,
    softmax_cross_entropy,
)

CNN_FILTERS = (128, 128, 128, 256, 128)
CNN_DROP_RATE = 0.4
RESNET_STAGE_BLOCKS = (3, 4, 6, 3)
RESNET_STAGE_FILTERS = (64, 128, 256, 512)


@dataclass
class DetectorModel:
    """A built (possibly trained) detector network plus its metadata."""

    architecture: str
    input_width: int
    num_classes: int
    network: Network
    epochs_seen: int = 0
    config_digest: str = ""
    display_name: str = ""

    def logits(self, features: np.ndarray, train: bool = False) -> np.ndarray:
        return self.network.forward(features, train)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float


def build_cnndetector(input_width: int, num_classes: int,
                      rng: np.random.Generator, dtype=np.float32) -> DetectorModel:
    """Five stacked width-preserving conv blocks with a dense head.

    Each block is conv(k=3, same padding) + batch norm + relu; blocks two
    through five are followed by width-2 max pooling, and block four adds
    40% dropout. Filters run 128/128/128/256/128.
    """
    if input_width < 16:
        raise ConfigError(f"input width {input_width} below the minimum of 16")
    if num_classes < 2:
        raise ConfigError("need at least 2 classes")
    layers = []
    width = input_width
    in_ch = 1
    for i, filters in enumerate(CNN_FILTERS):
        layers.append(Conv1D(in_ch, filters, 3, 1, 1, rng, dtype))
        layers.append(BatchNorm1D(filters, dtype=dtype))
        layers.append(ReLU())
        if i >= 1:
            pool = MaxPool1D(2)
            if width < 2:
                raise ConfigError(f"width collapsed to {width} before pool {i + 1}")
            width = pool.out_width(width)
            layers.append(pool)
        if i == 3:
            layers.append(Dropout(CNN_DROP_RATE))
        in_ch = filters
    if width < 1:
        raise ConfigError("width collapsed below 1 through the pools")
    layers.append(Flatten())
    layers.append(Dense(in_ch * width, num_classes, rng, dtype))
    return DetectorModel("cnndetector", input_width, num_classes, Network(layers))


def build_radionet(input_width: int, num_classes: int,
                   rng: np.random.Generator, dtype=np.float32) -> DetectorModel:
    """Residual detector: 16 basic blocks in stages of 3/4/6/3.

    A width-7 stride-2 stem feeds max pooling, then stages with 64, 128,
    256 and 512 filters; the first block of stages two through four halves
    the width with a projection shortcut. Global average pooling feeds the
    dense head.
    """
    if input_width < 16:
        raise ConfigError(f"input width {input_width} below the minimum of 16")
    if num_classes < 2:
        raise ConfigError("need at least 2 classes")
    layers = []
    stem = Conv1D(1, RESNET_STAGE_FILTERS[0], 7, 2, 3, rng, dtype)
    layers += [stem, BatchNorm1D(RESNET_STAGE_FILTERS[0], dtype=dtype), ReLU()]
    width = stem.out_width(input_width)
    pool = MaxPool1D(2)
    if width < 2:
        raise ConfigError(f"width collapsed to {width} at the stem pool")
    width = pool.out_width(width)
    layers.append(pool)
    in_ch = RESNET_STAGE_FILTERS[0]
    for stage, (blocks, filters) in enumerate(zip(RESNET_STAGE_BLOCKS,
                                                  RESNET_STAGE_FILTERS)):
        for b in range(blocks):
            stride = 2 if stage > 0 and b == 0 else 1
            block = ResidualBlock(in_ch, filters, stride, None, rng, dtype)
            width = block.out_width(width)
            if width < 1:
                raise ConfigError(f"width collapsed to {width} in stage {stage + 1}")
            layers.append(block)
            in_ch = filters
    layers.append(AvgPool1D(None))
    layers.append(Dense(in_ch, num_classes, rng, dtype))
    return DetectorModel("radionet", input_width, num_classes, Network(layers))


_BUILDERS = {"cnndetector": build_cnndetector, "radionet": build_radionet}


def build_detector(architecture: str, input_width: int, num_classes: int,
                   rng: np.random.Generator, dtype=np.float32) -> DetectorModel:
    try:
        builder = _BUILDERS[architecture]
    except KeyError:
        raise ConfigError(f"unknown architecture {architecture!r}") from None
    return builder(input_width, num_classes, rng, dtype)


def predict_features(model: DetectorModel, features: np.ndarray,
                     batch_size: int = 512) -> np.ndarray:
    """Predicted class per feature row, in inference mode."""
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[1] != model.input_width:
        raise DataError(
            f"features {features.shape} do not match model width {model.input_width}")
    dtype = next(iter(model.network.named_params().values())).dtype
    out = np.empty(features.shape[0], dtype=np.int64)
    for start in range(0, features.shape[0], batch_size):
        chunk = features[start:start + batch_size].astype(dtype, copy=False)
        logits = model.logits(chunk[:, :, None], train=False)
        out[start:start + batch_size] = np.argmax(logits, axis=1)
    return out


def _data_arrays(dataset):
    feats = np.asarray(dataset.features)
    labels = np.asarray(dataset.labels)
    if feats.ndim != 2 or labels.ndim != 1 or feats.shape[0] != labels.shape[0]:
        raise DataError(f"malformed dataset: features {feats.shape}, labels {labels.shape}")
    return feats, labels


def train_detector(model: DetectorModel, train_set, val_set,
                   config: TrainConfig):
    """Mini-batch SGD training; retains the best-validation parameters.

    Args:
        model: Freshly built or previously trained detector (updated in place).
        train_set, val_set: Objects exposing ``features`` (rows of the
            model's input width) and integer ``labels`` below num_classes.
        config: Optimizer and schedule hyperparameters.

    Returns:
        (model, history) with one EpochStats per epoch.
    """
    train_x, train_y = _data_arrays(train_set)
    val_x, val_y = _data_arrays(val_set)
    for name, x, y in (("train", train_x, train_y), ("val", val_x, val_y)):
        if x.shape[1] != model.input_width:
            raise DataError(f"{name} width {x.shape[1]} != model width {model.input_width}")
        if y.size and (y.min() < 0 or y.max() >= model.num_classes):
            raise DataError(f"{name} labels outside [0, {model.num_classes})")

    history = []
    if config.epochs == 0:
        return model, history

    rng = np.random.default_rng([config.seed, 0x5eed])
    for i, drop in enumerate(model.network.dropout_layers()):
        drop.rng = np.random.default_rng([config.seed, 0xd0, i])

    dtype = next(iter(model.network.named_params().values())).dtype
    train_x = train_x.astype(dtype, copy=False)
    eye = np.eye(model.num_classes, dtype=dtype)
    params = model.network.named_params()
    optimizer = SGD(params, config.learning_rate, config.momentum, config.nesterov)

    best_acc = -1.0
    best_state = None
    for epoch in range(config.epochs):
        order = rng.permutation(train_x.shape[0])
        losses = []
        for step, start in enumerate(range(0, order.size, config.batch_size)):
            idx = order[start:start + config.batch_size]
            if idx.size < 2:
                continue  # batch norm cannot standardize a single row
            x = train_x[idx][:, :, None]
            logits = model.network.forward(x, train=True)
            loss, grad = softmax_cross_entropy(logits, eye[train_y[idx]])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, step {step}")
            model.network.backward(grad)
            optimizer.step(model.network.named_grads())
            losses.append(loss)
        val_acc = float(np.mean(predict_features(model, val_x) == val_y))
        history.append(EpochStats(epoch, float(np.mean(losses)), val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_state = model.network.state_snapshot()
    if best_state is not None:
        model.network.load_state(best_state)
    model.epochs_seen += config.epochs
    model.config_digest = _train_digest(config, train_x.shape, val_x.shape)
    return model, history


def _train_digest(config: TrainConfig, train_shape, val_shape) -> str:
    text = f"{config!r}|train{train_shape}|val{val_shape}"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def detect_sources(model: DetectorModel, frame: Frame) -> int:
    """Estimate the source count of one frame with a trained detector.

    Pipeline: sample autocorrelation, upper-triangle features, network
    forward in inference mode, argmax over class logits.
    """
    feats = extract_features(autocorrelation(frame))
    return _classify(model, feats.values)


def detect_sources_coherent(model: DetectorModel, frame: Frame,
                            subarray_size: int) -> int:
    """As detect_sources, but smooths the covariance first.

    The model must have been built for the smoothed feature width
    L0 (L0 + 1).
    """
    cov = fbss(autocorrelation(frame), subarray_size)
    feats = extract_features(cov)
    return _classify(model, feats.values)


def _classify(model: DetectorModel, values: np.ndarray) -> int:
    if values.shape != (model.input_width,):
        raise DataError(
            f"feature width {values.shape[0]} does not match model width "
            f"{model.input_width}")
    return int(predict_features(model, values[None, :])[0])
