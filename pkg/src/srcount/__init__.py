"""Source enumeration for linear antenna arrays.

Synthetic snapshot simulation, covariance features with forward-backward
spatial smoothing, learned CNN detectors trained from scratch, and
MDL/AIC baselines, plus the evaluation sweeps tying them together.
"""

__version__ = "0.1.0"

from .array_model import ArrayGeometry, CoherentSpec, Frame, Scenario, sample_frame
from .classical import aic, detect_classical, mdl
from .covariance import CovMatrix, FeatureVector, autocorrelation, eigvalsh, extract_features, fbss
from .detectors import (
    DetectorModel,
    build_cnndetector,
    build_radionet,
    detect_sources,
    detect_sources_coherent,
    train_detector,
)
from .evalkit import (
    ClassicalDetector,
    GenerationConfig,
    LabeledDataset,
    SinrPolicy,
    build_dataset,
    evaluate,
    grid_coherent,
    sweep_sinr,
    sweep_snapshots,
)
from .tensornet import TrainConfig

__all__ = [
    "ArrayGeometry",
    "ClassicalDetector",
    "CoherentSpec",
    "CovMatrix",
    "DetectorModel",
    "FeatureVector",
    "Frame",
    "GenerationConfig",
    "LabeledDataset",
    "Scenario",
    "SinrPolicy",
    "TrainConfig",
    "aic",
    "autocorrelation",
    "build_cnndetector",
    "build_dataset",
    "build_radionet",
    "detect_classical",
    "detect_sources",
    "detect_sources_coherent",
    "eigvalsh",
    "evaluate",
    "extract_features",
    "fbss",
    "grid_coherent",
    "mdl",
    "sample_frame",
    "sweep_sinr",
    "sweep_snapshots",
    "train_detector",
]
