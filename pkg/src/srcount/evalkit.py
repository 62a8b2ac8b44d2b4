"""Dataset assembly, metrics, and the experiment sweeps.

Builds labeled feature datasets from randomized scenarios, scores any
detector (learned, classical, or callable) with a confusion matrix and
per-class metrics, and drives the accuracy-versus-SINR, accuracy-versus-
snapshots, and coherent-grid experiments.
"""

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .array_model import ArrayGeometry, CoherentSpec, Scenario, frame_rng, sample_frame
from .classical import aic as aic_curve
from .classical import mdl as mdl_curve
from .covariance import (
    CovMatrix,
    autocorrelation,
    eigvalsh,
    extract_features,
    fbss,
    features_to_matrix,
)
from .detectors import DetectorModel, TrainConfig, build_detector, predict_features, train_detector
from .errors import ConfigError, DataError, DomainError

SPLIT_STREAMS = {"train": 0, "val": 1, "test": 2}


@dataclass(frozen=True)
class SinrPolicy:
    """Fixed SINR or a uniform draw per frame."""

    kind: str = "uniform"
    value: float = 10.0
    low: float = 0.0
    high: float = 20.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform"):
            raise ConfigError(f"scenario.sinr_db.kind {self.kind!r} unknown")
        if self.kind == "uniform" and self.high < self.low:
            raise ConfigError("scenario.sinr_db range is reversed")

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "fixed":
            return self.value
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class GenerationConfig:
    """Everything a dataset draw depends on, besides the array geometry."""

    classes: tuple
    snapshots: int
    sinr: SinrPolicy = field(default_factory=SinrPolicy)
    coherent_kind: str = "none"  # none | uniform | fixed
    coherent_count: int = 0      # max replicas (uniform) or exact count (fixed)
    min_separation_deg: float = 1.0
    pipeline_kind: str = "plain"  # plain | fbss
    subarray: int = 0
    label_semantics: str = "total"  # total | noncoherent
    count: int = 0
    seed: int = 0
    split: str = "train"
    stream: int = -1  # seed substream; defaults to the split's code

    def __post_init__(self):
        if not self.classes:
            raise ConfigError("scenario.classes must be non-empty")
        if any(c < 0 for c in self.classes):
            raise ConfigError("scenario.classes must be non-negative")
        if self.snapshots < 1:
            raise ConfigError("scenario.snapshots must be positive")
        if self.coherent_kind not in ("none", "uniform", "fixed"):
            raise ConfigError(f"scenario.coherent.kind {self.coherent_kind!r} unknown")
        if self.coherent_kind != "none" and self.coherent_count < 0:
            raise ConfigError("scenario.coherent count must be >= 0")
        if self.pipeline_kind not in ("plain", "fbss"):
            raise ConfigError(f"pipeline.kind {self.pipeline_kind!r} unknown")
        if self.pipeline_kind == "fbss" and self.subarray < 2:
            raise ConfigError("pipeline.subarray must be >= 2 for fbss")
        if self.label_semantics not in ("total", "noncoherent"):
            raise ConfigError(f"label_semantics {self.label_semantics!r} unknown")
        if self.count < 0:
            raise ConfigError("count must be >= 0")
        if self.stream < 0:
            object.__setattr__(self, "stream", SPLIT_STREAMS.get(self.split, 9))

    def cov_size(self, geometry: ArrayGeometry) -> int:
        return self.subarray if self.pipeline_kind == "fbss" else geometry.num_elements

    def feature_width(self, geometry: ArrayGeometry) -> int:
        n = self.cov_size(geometry)
        return n * (n + 1)


@dataclass
class LabeledDataset:
    """Feature rows with integer labels and generation bookkeeping."""

    features: np.ndarray
    labels: np.ndarray
    provenance: str
    split: str
    num_elements: int
    cov_size: int
    snapshots: int
    pipeline_kind: str = "plain"

    def __len__(self):
        return self.labels.shape[0]

    @property
    def smoothed(self) -> bool:
        return self.cov_size < self.num_elements


@dataclass(frozen=True)
class ClassicalDetector:
    """MDL or AIC run on the covariance behind each feature row."""

    method: str
    fbss_subarray: int = 0
    display_name: str = ""

    @property
    def name(self) -> str:
        if self.display_name:
            return self.display_name
        if self.fbss_subarray:
            return f"fbss{self.fbss_subarray}-{self.method}"
        return self.method


@dataclass(frozen=True)
class TrainableSpec:
    """A detector to build and train inside a sweep, per sweep point."""

    architecture: str
    num_classes: int
    train: TrainConfig
    train_count: int
    val_count: int
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or self.architecture


@dataclass
class EvalReport:
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float

    @property
    def num_classes(self) -> int:
        return self.confusion.shape[0]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
        }

    def metrics_table(self) -> str:
        lines = ["class\tprecision\trecall\tf1\tsupport"]
        support = self.confusion.sum(axis=1)
        for c in range(self.num_classes):
            lines.append(f"{c}\t{self.precision[c]:.4f}\t{self.recall[c]:.4f}"
                         f"\t{self.f1[c]:.4f}\t{support[c]}")
        lines.append(f"accuracy\t{self.accuracy:.4f}")
        return "\n".join(lines) + "\n"

    def confusion_table(self) -> str:
        header = "true\\pred\t" + "\t".join(str(c) for c in range(self.num_classes))
        lines = [header]
        for c in range(self.num_classes):
            lines.append(str(c) + "\t" + "\t".join(str(v) for v in self.confusion[c]))
        return "\n".join(lines) + "\n"


def worker_count() -> int:
    """Worker cap from SRCOUNT_THREADS, defaulting to the CPU count."""
    env = os.environ.get("SRCOUNT_THREADS", "")
    if env.strip():
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SRCOUNT_THREADS={env!r} is not an integer") from None
        return max(1, n)
    return os.cpu_count() or 1


def draw_scenario(geometry: ArrayGeometry, config: GenerationConfig,
                  rng: np.random.Generator):
    """One random scenario; returns (scenario, label) per the configured
    label semantics."""
    label = int(config.classes[rng.integers(len(config.classes))])
    if config.coherent_kind == "none":
        n_coh = 0
    elif config.coherent_kind == "fixed":
        n_coh = config.coherent_count
    else:
        cap = config.coherent_count
        if config.label_semantics == "total":
            cap = min(cap, max(label - 1, 0))
        n_coh = int(rng.integers(0, cap + 1)) if cap > 0 else 0
    if config.label_semantics == "total":
        total = label
        n_nc = total - n_coh
    else:
        n_nc = label
        if n_nc == 0:
            n_coh = 0
        total = n_nc + n_coh
    if n_nc < 0 or (n_coh > 0 and n_nc == 0):
        raise ConfigError(f"class {label} cannot host {n_coh} coherent replicas")
    if total > geometry.num_elements - 1:
        raise ConfigError(
            f"{total} sources exceed the array capacity {geometry.num_elements - 1}")

    angles = _draw_angles(total, config.min_separation_deg, rng)
    specs = []
    if n_coh:
        parents = rng.integers(0, n_nc, size=n_coh)
        rhos = rng.uniform(0.5, 1.0, size=n_coh)
        phis = rng.uniform(0.0, 2.0 * np.pi, size=n_coh)
        specs = [CoherentSpec(int(p), float(r), float(f))
                 for p, r, f in zip(parents, rhos, phis)]
    scenario = Scenario(
        angles_deg=tuple(angles),
        snapshots=config.snapshots,
        sinr_db=config.sinr.draw(rng),
        seed=int(rng.integers(0, 2**63)),
        coherent_specs=tuple(specs),
        min_separation_deg=config.min_separation_deg,
    )
    return scenario, label


def _draw_angles(count: int, min_sep: float, rng: np.random.Generator) -> np.ndarray:
    if count == 0:
        return np.empty(0)
    for _ in range(10_000):
        angles = np.sort(rng.uniform(-60.0, 60.0, size=count))
        if count == 1 or np.min(np.diff(angles)) >= min_sep:
            return rng.permutation(angles)
    raise DomainError(f"cannot place {count} angles {min_sep} degrees apart")


def frame_features(geometry: ArrayGeometry, scenario: Scenario,
                   config: GenerationConfig) -> np.ndarray:
    """Run the configured feature pipeline on one freshly sampled frame."""
    frame = sample_frame(geometry, scenario)
    cov = autocorrelation(frame)
    if config.pipeline_kind == "fbss":
        cov = fbss(cov, config.subarray)
    return extract_features(cov).values


def build_dataset(geometry: ArrayGeometry, config: GenerationConfig,
                  threads: int = 0) -> LabeledDataset:
    """Sample ``config.count`` frames and extract labeled feature rows.

    Each frame owns an independent seed substream derived from
    (seed, stream, index), so generation order and worker count do not
    affect the result.
    """
    width = config.feature_width(geometry)
    _check_feasible(geometry, config)
    features = np.empty((config.count, width), dtype=np.float32)
    labels = np.empty(config.count, dtype=np.int64)

    def fill(i: int) -> None:
        rng = frame_rng(config.seed, config.stream, i)
        scenario, label = draw_scenario(geometry, config, rng)
        features[i] = frame_features(geometry, scenario, config)
        labels[i] = label

    n_workers = threads or worker_count()
    if n_workers > 1 and config.count > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill, range(config.count)))
    else:
        for i in range(config.count):
            fill(i)
    return LabeledDataset(
        features=features,
        labels=labels,
        provenance=dataset_digest(geometry, config),
        split=config.split,
        num_elements=geometry.num_elements,
        cov_size=config.cov_size(geometry),
        snapshots=config.snapshots,
        pipeline_kind=config.pipeline_kind,
    )


def _check_feasible(geometry: ArrayGeometry, config: GenerationConfig) -> None:
    cap = geometry.num_elements - 1
    worst = max(config.classes)
    if config.label_semantics == "noncoherent" and config.coherent_kind != "none":
        worst += config.coherent_count
    if config.coherent_kind == "fixed" and config.coherent_count > 0 \
            and config.label_semantics == "noncoherent" and min(config.classes) == 0:
        raise ConfigError("class 0 cannot host coherent replicas")
    if worst > cap:
        raise ConfigError(f"classes need up to {worst} sources; array resolves {cap}")
    if config.pipeline_kind == "fbss" and config.subarray > geometry.num_elements:
        raise ConfigError("pipeline.subarray exceeds the element count")


def dataset_digest(geometry: ArrayGeometry, config: GenerationConfig) -> str:
    text = f"{geometry!r}|{config!r}"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def classify_rows(detector, dataset: LabeledDataset) -> np.ndarray:
    """Predictions of any supported detector over a feature dataset."""
    if isinstance(detector, DetectorModel):
        return predict_features(detector, dataset.features)
    if isinstance(detector, ClassicalDetector):
        return _classical_rows(detector, dataset)
    if callable(detector):
        return np.asarray(detector(dataset), dtype=np.int64)
    raise DataError(f"unsupported detector {detector!r}")


def _classical_rows(detector: ClassicalDetector, dataset: LabeledDataset) -> np.ndarray:
    if detector.method not in ("mdl", "aic"):
        raise ConfigError(f"unknown criterion {detector.method!r}")
    if detector.fbss_subarray and dataset.smoothed:
        raise DataError("dataset features are already smoothed; cannot smooth again")
    curve = mdl_curve if detector.method == "mdl" else aic_curve
    n = dataset.cov_size
    out = np.empty(len(dataset), dtype=np.int64)
    for i in range(len(dataset)):
        matrix = features_to_matrix(dataset.features[i].astype(np.float64), n)
        cov = CovMatrix(matrix, snapshots=dataset.snapshots,
                        subarray=n if dataset.smoothed else None,
                        num_subarrays=(dataset.num_elements - n + 1
                                       if dataset.smoothed else None))
        if detector.fbss_subarray:
            cov = fbss(cov, detector.fbss_subarray)
        out[i] = curve(eigvalsh(cov), dataset.snapshots).argmin
    return out


def evaluate(detector, dataset: LabeledDataset, num_classes: int = 0) -> EvalReport:
    """Confusion matrix and derived metrics of a detector over a dataset.

    Args:
        detector: DetectorModel, ClassicalDetector, or a callable mapping
            the dataset to a prediction vector.
        dataset: Labeled feature rows.
        num_classes: Matrix size override; defaults to the model's class
            count or to what labels and predictions span.

    Returns:
        EvalReport; confusion rows are true labels, columns predictions.
    """
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    preds = classify_rows(detector, dataset)
    labels = dataset.labels
    if not num_classes:
        if isinstance(detector, DetectorModel):
            num_classes = detector.num_classes
        else:
            num_classes = int(max(labels.max(), preds.max())) + 1
    return report_from_predictions(labels, preds, num_classes)


def report_from_predictions(labels: np.ndarray, preds: np.ndarray,
                            num_classes: int) -> EvalReport:
    if labels.max() >= num_classes or preds.max() >= num_classes:
        raise DataError("labels or predictions exceed num_classes")
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)
    col = confusion.sum(axis=0)
    row = confusion.sum(axis=1)
    diag = np.diag(confusion)
    precision = np.divide(diag, col, out=np.zeros(num_classes), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros(num_classes), where=row > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros(num_classes), where=pr > 0)
    accuracy = float(diag.sum() / confusion.sum())
    return EvalReport(confusion, precision, recall, f1, accuracy)


def detector_name(detector) -> str:
    custom = getattr(detector, "display_name", "")
    if custom:
        return custom
    if isinstance(detector, DetectorModel):
        return detector.architecture
    if isinstance(detector, (ClassicalDetector,)):
        return detector.name
    if isinstance(detector, TrainableSpec):
        return detector.label
    return getattr(detector, "name", detector.__class__.__name__)


def sweep_sinr(detectors, sinr_points, frames_per_point: int,
               geometry: ArrayGeometry, base_config: GenerationConfig):
    """Accuracy of each detector on a fresh test set per SINR point.

    Returns rows of dicts: detector, sinr_db, accuracy.
    """
    rows = []
    for j, sinr in enumerate(sinr_points):
        config = replace(base_config,
                         sinr=SinrPolicy(kind="fixed", value=float(sinr)),
                         count=frames_per_point, split="test", stream=100 + j)
        dataset = build_dataset(geometry, config)
        for det in detectors:
            report = evaluate(det, dataset)
            rows.append({"detector": detector_name(det), "sinr_db": float(sinr),
                         "accuracy": report.accuracy})
    return rows


def sweep_snapshots(detectors, snapshot_points, frames_per_point: int,
                    geometry: ArrayGeometry, base_config: GenerationConfig):
    """Accuracy versus snapshot count N.

    Classical detectors are re-run directly on each point's test set;
    TrainableSpec entries are rebuilt and retrained per point on data
    generated at that snapshot count.
    """
    rows = []
    for j, n_snap in enumerate(snapshot_points):
        n_snap = int(n_snap)
        test_cfg = replace(base_config, snapshots=n_snap, count=frames_per_point,
                           split="test", stream=200 + 10 * j)
        test_set = build_dataset(geometry, test_cfg)
        for det in detectors:
            if isinstance(det, TrainableSpec):
                model = _train_for_point(det, geometry, base_config, n_snap,
                                         stream_base=200 + 10 * j)
                report = evaluate(model, test_set)
                name = det.label
            else:
                report = evaluate(det, test_set)
                name = detector_name(det)
            rows.append({"detector": name, "snapshots": n_snap,
                         "accuracy": report.accuracy})
    return rows


def _train_for_point(spec: TrainableSpec, geometry: ArrayGeometry,
                     base_config: GenerationConfig, n_snap: int,
                     stream_base: int) -> DetectorModel:
    train_cfg = replace(base_config, snapshots=n_snap, count=spec.train_count,
                        split="train", stream=stream_base + 1)
    val_cfg = replace(base_config, snapshots=n_snap, count=spec.val_count,
                      split="val", stream=stream_base + 2)
    train_set = build_dataset(geometry, train_cfg)
    val_set = build_dataset(geometry, val_cfg)
    rng = np.random.default_rng([spec.train.seed, 0xb111d])
    model = build_detector(spec.architecture, train_set.features.shape[1],
                           spec.num_classes, rng)
    train_detector(model, train_set, val_set, spec.train)
    return model


def grid_coherent(detectors, noncoherent_range, coherent_range,
                  frames_per_cell: int, geometry: ArrayGeometry,
                  base_config: GenerationConfig):
    """Per-cell accuracy over (independent count, replica count) pairs.

    Infeasible cells (replicas without a parent, or total sources beyond
    the array capacity) report accuracy NaN.
    """
    rows = []
    cap = geometry.num_elements - 1
    for n_nc in noncoherent_range:
        for n_coh in coherent_range:
            feasible = (n_coh == 0 or n_nc >= 1) and n_nc + n_coh <= cap
            if not feasible:
                for det in detectors:
                    rows.append({"detector": detector_name(det),
                                 "noncoherent": n_nc, "coherent": n_coh,
                                 "accuracy": float("nan")})
                continue
            config = replace(base_config, classes=(int(n_nc),),
                             coherent_kind="fixed", coherent_count=int(n_coh),
                             label_semantics="noncoherent",
                             count=frames_per_cell, split="test",
                             stream=300 + 10 * int(n_nc) + int(n_coh))
            dataset = build_dataset(geometry, config)
            for det in detectors:
                preds = classify_rows(det, dataset)
                acc = float(np.mean(preds == dataset.labels))
                rows.append({"detector": detector_name(det),
                             "noncoherent": int(n_nc), "coherent": int(n_coh),
                             "accuracy": acc})
    return rows


def rows_to_tsv(rows, columns) -> str:
    lines = ["\t".join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            v = row[c]
            cells.append(f"{v:.4f}" if isinstance(v, float) else str(v))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
