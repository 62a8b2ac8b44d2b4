"""Bit-exact file formats: datasets, checkpoints, and atomic writes.

Dataset files ("SDS1") hold either raw complex frames or extracted feature
rows, one fixed-size record per frame, all little-endian. Checkpoints
("SCKP") pair a JSON manifest with concatenated float32 tensor payloads
and a trailing 64-bit payload checksum.
"""

import hashlib
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .detectors import DetectorModel
from .errors import ChecksumError, DataError
from .evalkit import LabeledDataset
from .tensornet import network_from_specs

DATASET_MAGIC = b"SDS1"
DATASET_VERSION = 1
_DATASET_HEADER = struct.Struct("<4sHBHHIIB")

CHECKPOINT_MAGIC = b"SCKP"
CHECKPOINT_VERSION = 1

KIND_FRAMES = 0
KIND_FEATURES = 1


def atomic_write(path: str, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    partial file."""
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class DatasetFile:
    """Parsed dataset file contents."""

    kind: int
    num_elements: int
    cov_size: int
    snapshots: int
    labels: np.ndarray   # (count, arity) uint16
    payload: np.ndarray  # features: (count, width) f32; frames: (count, L, N) c64

    @property
    def count(self) -> int:
        return self.labels.shape[0]

    def to_labeled(self, split: str = "test", provenance: str = "") -> LabeledDataset:
        if self.kind != KIND_FEATURES:
            raise DataError("dataset file holds raw frames, not features")
        pipeline = "fbss" if self.cov_size < self.num_elements else "plain"
        return LabeledDataset(
            features=self.payload,
            labels=self.labels[:, 0].astype(np.int64),
            provenance=provenance,
            split=split,
            num_elements=self.num_elements,
            cov_size=self.cov_size,
            snapshots=self.snapshots,
            pipeline_kind=pipeline,
        )


def _dataset_bytes(kind, num_elements, cov_size, snapshots, labels, payload) -> bytes:
    labels = np.ascontiguousarray(labels, dtype="<u2")
    if labels.ndim == 1:
        labels = labels[:, None]
    count, arity = labels.shape
    header = _DATASET_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, kind,
                                  num_elements, cov_size, snapshots, count, arity)
    if count == 0:
        return header
    if kind == KIND_FEATURES:
        flat = np.ascontiguousarray(payload, dtype="<f4").reshape(count, -1)
    else:
        cplx = np.ascontiguousarray(payload, dtype="<c8").reshape(count, -1)
        flat = cplx.view("<f4")  # interleaved re/im, row-major
    if flat.shape[0] != count:
        raise DataError(f"payload rows {flat.shape[0]} != label rows {count}")
    records = np.empty((count, arity * 2 + flat.shape[1] * 4), dtype=np.uint8)
    records[:, :arity * 2] = labels.view(np.uint8).reshape(count, arity * 2)
    records[:, arity * 2:] = flat.view(np.uint8).reshape(count, -1)
    return header + records.tobytes()


def write_feature_dataset(path: str, dataset: LabeledDataset) -> None:
    data = _dataset_bytes(KIND_FEATURES, dataset.num_elements, dataset.cov_size,
                          dataset.snapshots, dataset.labels, dataset.features)
    atomic_write(path, data)


def write_frame_dataset(path: str, frames: np.ndarray, labels: np.ndarray,
                        num_elements: int, snapshots: int) -> None:
    """Raw complex frames with (total, noncoherent) label pairs."""
    data = _dataset_bytes(KIND_FRAMES, num_elements, num_elements, snapshots,
                          labels, frames)
    atomic_write(path, data)


def read_dataset(path: str) -> DatasetFile:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _DATASET_HEADER.size:
        raise DataError(f"{path}: truncated dataset header")
    magic, version, kind, L, n, snaps, count, arity = _DATASET_HEADER.unpack_from(raw)
    if magic != DATASET_MAGIC:
        raise DataError(f"{path}: not a dataset file")
    if version != DATASET_VERSION:
        raise DataError(f"{path}: unsupported dataset version {version}")
    if kind == KIND_FEATURES:
        row_vals = n * (n + 1)
    elif kind == KIND_FRAMES:
        row_vals = 2 * L * snaps
    else:
        raise DataError(f"{path}: unknown payload kind {kind}")
    rec_size = arity * 2 + row_vals * 4
    body = raw[_DATASET_HEADER.size:]
    if len(body) != count * rec_size:
        raise DataError(f"{path}: expected {count * rec_size} record bytes, "
                        f"got {len(body)}")
    records = np.frombuffer(body, dtype=np.uint8).reshape(count, rec_size) \
        if count else np.empty((0, rec_size), dtype=np.uint8)
    labels = records[:, :arity * 2].copy().view("<u2").reshape(count, arity)
    flat = records[:, arity * 2:].copy().view("<f4")
    if kind == KIND_FEATURES:
        payload = flat.reshape(count, row_vals).astype(np.float32)
    else:
        payload = flat.view("<c8").reshape(count, L, snaps).astype(np.complex64)
    return DatasetFile(kind, L, n, snaps, labels.astype(np.uint16), payload)


def _payload_checksum(payload: bytes) -> int:
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


def save_checkpoint(path: str, model: DetectorModel) -> None:
    """Serialize architecture, metadata, and all tensor state."""
    state = model.network.named_state()
    manifest = []
    chunks = []
    for name, arr in state.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        manifest.append({"name": name, "shape": list(arr.shape), "nbytes": len(data)})
        chunks.append(data)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "architecture": model.architecture,
        "input_width": model.input_width,
        "num_classes": model.num_classes,
        "epochs_seen": model.epochs_seen,
        "config_digest": model.config_digest,
        "layers": model.network.specs(),
        "tensors": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    payload = b"".join(chunks)
    blob = (CHECKPOINT_MAGIC + struct.pack("<I", len(header_bytes)) + header_bytes
            + payload + struct.pack("<Q", _payload_checksum(payload)))
    atomic_write(path, blob)


def load_checkpoint(path: str) -> DetectorModel:
    """Rebuild a DetectorModel; raises ChecksumError on payload corruption."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    (header_len,) = struct.unpack_from("<I", raw, 4)
    header_end = 8 + header_len
    if len(raw) < header_end + 8:
        raise DataError(f"{path}: truncated checkpoint")
    header = json.loads(raw[8:header_end].decode())
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version")
    payload = raw[header_end:-8]
    (stored,) = struct.unpack("<Q", raw[-8:])
    if _payload_checksum(payload) != stored:
        raise ChecksumError(f"{path}: payload checksum mismatch")

    network = network_from_specs(header["layers"], rng=None, dtype=np.float32)
    state = {}
    offset = 0
    for entry in header["tensors"]:
        nbytes = entry["nbytes"]
        chunk = payload[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise DataError(f"{path}: tensor {entry['name']} truncated")
        state[entry["name"]] = np.frombuffer(chunk, dtype="<f4").reshape(
            entry["shape"]).astype(np.float32)
        offset += nbytes
    if offset != len(payload):
        raise DataError(f"{path}: {len(payload) - offset} stray payload bytes")
    network.load_state(state)
    return DetectorModel(
        architecture=header["architecture"],
        input_width=header["input_width"],
        num_classes=header["num_classes"],
        network=network,
        epochs_seen=header.get("epochs_seen", 0),
        config_digest=header.get("config_digest", ""),
    )
