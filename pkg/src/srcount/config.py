"""Run configuration: strict JSON parsing with field-path diagnostics.

Unknown keys are rejected so a typo cannot silently change an experiment.
Cross-field consistency (feature width versus model input, class
feasibility versus array capacity) is validated up front.
"""

import json
from dataclasses import dataclass, replace
from typing import Optional

from .array_model import ArrayGeometry
from .errors import ConfigError
from .evalkit import GenerationConfig, SinrPolicy
from .tensornet import TrainConfig


def _require(block: dict, path: str, allowed: dict) -> dict:
    """Check key membership and requiredness; returns the block."""
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    for key in block:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")
    for key, required in allowed.items():
        if required and key not in block:
            raise ConfigError(f"{path}.{key}: missing required key")
    return block


def _typed(block: dict, path: str, key: str, types, default=None):
    if key not in block:
        return default
    value = block[key]
    if types is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, types) or isinstance(value, bool) and types is not bool:
        raise ConfigError(f"{path}.{key}: expected {getattr(types, '__name__', types)}")
    return value


@dataclass(frozen=True)
class SweepConfig:
    kind: str
    points: tuple = ()
    frames_per_point: int = 3000
    detectors: tuple = ()
    noncoherent_range: tuple = ()
    coherent_range: tuple = ()
    frames_per_cell: int = 3000


@dataclass(frozen=True)
class RunConfig:
    seed: int
    geometry: ArrayGeometry
    generation: GenerationConfig  # count/split filled per command
    architecture: str
    num_classes: int
    train: TrainConfig
    counts: dict
    sweep: Optional[SweepConfig] = None

    @property
    def feature_width(self) -> int:
        return self.generation.feature_width(self.geometry)

    def generation_for(self, split: str, count: int = -1) -> GenerationConfig:
        if count < 0:
            count = self.counts.get(split, 0)
        return replace(self.generation, count=count, split=split, stream=-1,
                       seed=self.seed)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    _require(raw, "config", {"seed": True, "geometry": True, "scenario": True,
                             "pipeline": True, "model": True, "train": True,
                             "io": False, "sweep": False})
    seed = _typed(raw, "config", "seed", int)

    geo = _require(raw["geometry"], "geometry",
                   {"num_elements": True, "spacing": False})
    spacing = _typed(geo, "geometry", "spacing", float, 0.5)
    num_elements = _typed(geo, "geometry", "num_elements", int)
    try:
        geometry = ArrayGeometry(num_elements,
                                 tuple(spacing * i for i in range(num_elements)))
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from None

    generation = _parse_scenario(raw["scenario"], raw["pipeline"], seed)

    model = _require(raw["model"], "model",
                     {"architecture": True, "num_classes": True})
    architecture = _typed(model, "model", "architecture", str)
    if architecture not in ("cnndetector", "radionet"):
        raise ConfigError(f"model.architecture: unknown value {architecture!r}")
    num_classes = _typed(model, "model", "num_classes", int)
    if num_classes < 2:
        raise ConfigError("model.num_classes: must be >= 2")

    train = _parse_train(raw["train"], seed)
    counts = _parse_counts(raw.get("io", {}))
    sweep = _parse_sweep(raw["sweep"]) if "sweep" in raw else None

    config = RunConfig(seed, geometry, generation, architecture, num_classes,
                       train, counts, sweep)
    _cross_validate(config)
    return config


def _parse_scenario(block: dict, pipeline_block: dict, seed: int) -> GenerationConfig:
    _require(block, "scenario", {"classes": True, "snapshots": True,
                                 "sinr_db": True, "coherent": False,
                                 "min_separation_deg": False,
                                 "label_semantics": False})
    classes = block["classes"]
    if (not isinstance(classes, list) or not classes
            or not all(isinstance(c, int) and not isinstance(c, bool) for c in classes)):
        raise ConfigError("scenario.classes: expected a non-empty integer list")

    sinr_block = _require(block["sinr_db"], "scenario.sinr_db",
                          {"kind": True, "value": False, "low": False, "high": False})
    kind = _typed(sinr_block, "scenario.sinr_db", "kind", str)
    if kind == "fixed":
        sinr = SinrPolicy(kind="fixed",
                          value=_typed(sinr_block, "scenario.sinr_db", "value", float, 10.0))
    elif kind == "uniform":
        sinr = SinrPolicy(kind="uniform",
                          low=_typed(sinr_block, "scenario.sinr_db", "low", float, 0.0),
                          high=_typed(sinr_block, "scenario.sinr_db", "high", float, 20.0))
    else:
        raise ConfigError(f"scenario.sinr_db.kind: unknown value {kind!r}")

    coherent_kind, coherent_count = "none", 0
    if "coherent" in block:
        coh = _require(block["coherent"], "scenario.coherent",
                       {"kind": True, "max": False, "count": False})
        coherent_kind = _typed(coh, "scenario.coherent", "kind", str)
        if coherent_kind == "uniform":
            coherent_count = _typed(coh, "scenario.coherent", "max", int, 0)
        elif coherent_kind == "fixed":
            coherent_count = _typed(coh, "scenario.coherent", "count", int, 0)
        elif coherent_kind != "none":
            raise ConfigError(f"scenario.coherent.kind: unknown value {coherent_kind!r}")

    pipe = _require(pipeline_block, "pipeline", {"kind": True, "subarray": False})
    pipeline_kind = _typed(pipe, "pipeline", "kind", str)
    subarray = _typed(pipe, "pipeline", "subarray", int, 0)
    if pipeline_kind not in ("plain", "fbss"):
        raise ConfigError(f"pipeline.kind: unknown value {pipeline_kind!r}")
    if pipeline_kind == "fbss" and subarray < 2:
        raise ConfigError("pipeline.subarray: required (>= 2) for fbss")

    try:
        return GenerationConfig(
            classes=tuple(classes),
            snapshots=_typed(block, "scenario", "snapshots", int),
            sinr=sinr,
            coherent_kind=coherent_kind,
            coherent_count=coherent_count,
            min_separation_deg=_typed(block, "scenario", "min_separation_deg",
                                      float, 1.0),
            pipeline_kind=pipeline_kind,
            subarray=subarray,
            label_semantics=_typed(block, "scenario", "label_semantics", str, "total"),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _parse_train(block: dict, seed: int) -> TrainConfig:
    _require(block, "train", {"learning_rate": True, "momentum": False,
                              "nesterov": False, "batch_size": False,
                              "epochs": True, "seed": False, "loss": False})
    try:
        return TrainConfig(
            learning_rate=_typed(block, "train", "learning_rate", float),
            momentum=_typed(block, "train", "momentum", float, 0.9),
            nesterov=_typed(block, "train", "nesterov", bool, True),
            batch_size=_typed(block, "train", "batch_size", int, 64),
            epochs=_typed(block, "train", "epochs", int),
            seed=_typed(block, "train", "seed", int, seed),
            loss=_typed(block, "train", "loss", str, "categorical_cross_entropy"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _parse_counts(block: dict) -> dict:
    _require(block, "io", {"counts": False})
    counts = {"train": 0, "val": 0, "test": 0}
    if "counts" in block:
        sub = _require(block["counts"], "io.counts",
                       {"train": False, "val": False, "test": False})
        for key in counts:
            counts[key] = _typed(sub, "io.counts", key, int, 0)
            if counts[key] < 0:
                raise ConfigError(f"io.counts.{key}: must be >= 0")
    return counts


def _parse_sweep(block: dict) -> SweepConfig:
    _require(block, "sweep", {"kind": True, "points": False,
                              "frames_per_point": False, "detectors": True,
                              "noncoherent_range": False, "coherent_range": False,
                              "frames_per_cell": False})
    kind = _typed(block, "sweep", "kind", str)
    if kind not in ("sinr", "snapshots", "grid"):
        raise ConfigError(f"sweep.kind: unknown value {kind!r}")
    detectors = block["detectors"]
    if not isinstance(detectors, list) or not detectors:
        raise ConfigError("sweep.detectors: expected a non-empty list")
    parsed = []
    for i, det in enumerate(detectors):
        path = f"sweep.detectors[{i}]"
        det = _require(det, path, {"kind": True, "path": False, "name": False,
                                   "fbss": False, "architecture": False,
                                   "train_count": False, "val_count": False})
        dkind = _typed(det, path, "kind", str)
        if dkind == "checkpoint":
            if "path" not in det:
                raise ConfigError(f"{path}.path: required for checkpoint detectors")
        elif dkind in ("mdl", "aic"):
            pass
        elif dkind == "trainable":
            for req in ("architecture", "train_count", "val_count"):
                if req not in det:
                    raise ConfigError(f"{path}.{req}: required for trainable detectors")
        else:
            raise ConfigError(f"{path}.kind: unknown value {dkind!r}")
        parsed.append(dict(det))

    points = block.get("points", [])
    if not isinstance(points, list):
        raise ConfigError("sweep.points: expected a list")
    if kind in ("sinr", "snapshots") and "points" not in block:
        raise ConfigError("sweep.points: required for sinr/snapshots sweeps")

    def int_range(key, default):
        value = block.get(key, default)
        if (not isinstance(value, list) or len(value) != 2
                or not all(isinstance(v, int) for v in value)):
            raise ConfigError(f"sweep.{key}: expected [low, high]")
        return tuple(range(value[0], value[1] + 1))

    nc_range = coh_range = ()
    if kind == "grid":
        nc_range = int_range("noncoherent_range", [0, 5])
        coh_range = int_range("coherent_range", [0, 4])
    return SweepConfig(
        kind=kind,
        points=tuple(points),
        frames_per_point=_typed(block, "sweep", "frames_per_point", int, 3000),
        detectors=tuple(parsed),
        noncoherent_range=nc_range,
        coherent_range=coh_range,
        frames_per_cell=_typed(block, "sweep", "frames_per_cell", int, 3000),
    )


def _cross_validate(config: RunConfig) -> None:
    width = config.feature_width
    if width < 16:
        raise ConfigError(
            f"pipeline: feature width {width} is below the model minimum of 16")
    gen = config.generation
    if gen.pipeline_kind == "fbss" and gen.subarray > config.geometry.num_elements:
        raise ConfigError("pipeline.subarray: exceeds geometry.num_elements")
    cap = config.geometry.num_elements - 1
    worst = max(gen.classes)
    if gen.label_semantics == "noncoherent" and gen.coherent_kind != "none":
        worst += gen.coherent_count
    if worst > cap:
        raise ConfigError(
            f"scenario.classes: up to {worst} sources but the array resolves {cap}")
    if max(gen.classes) >= config.num_classes:
        raise ConfigError("model.num_classes: must exceed the largest class label")
