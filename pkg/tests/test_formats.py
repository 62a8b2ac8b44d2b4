import numpy as np
import pytest

from srcount.array_model import ArrayGeometry
from srcount.detectors import build_cnndetector, predict_features
from srcount.errors import ChecksumError, DataError
from srcount.evalkit import GenerationConfig, SinrPolicy, build_dataset
from srcount.formats import (
    load_checkpoint,
    read_dataset,
    save_checkpoint,
    write_feature_dataset,
    write_frame_dataset,
)


@pytest.fixture
def feature_dataset():
    geo = ArrayGeometry(10)
    config = GenerationConfig(classes=(0, 1, 2), snapshots=64,
                              sinr=SinrPolicy("fixed", value=10.0), count=12,
                              seed=3, split="test")
    return build_dataset(geo, config)


class TestDatasetFormat:
    def test_feature_round_trip(self, tmp_path, feature_dataset):
        path = str(tmp_path / "d.sds")
        write_feature_dataset(path, feature_dataset)
        loaded = read_dataset(path)
        assert loaded.kind == 1
        assert loaded.count == 12
        assert loaded.num_elements == 10
        assert loaded.cov_size == 10
        assert loaded.snapshots == 64
        assert np.array_equal(loaded.payload, feature_dataset.features)
        assert np.array_equal(loaded.labels[:, 0], feature_dataset.labels)

    def test_write_read_write_byte_identical(self, tmp_path, feature_dataset):
        p1 = str(tmp_path / "a.sds")
        p2 = str(tmp_path / "b.sds")
        write_feature_dataset(p1, feature_dataset)
        write_feature_dataset(p2, read_dataset(p1).to_labeled())
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_header_only_file(self, tmp_path):
        geo = ArrayGeometry(6)
        config = GenerationConfig(classes=(0,), snapshots=16,
                                  sinr=SinrPolicy("fixed", value=0.0), count=0,
                                  seed=0, split="test")
        path = str(tmp_path / "empty.sds")
        write_feature_dataset(path, build_dataset(geo, config))
        loaded = read_dataset(path)
        assert loaded.count == 0
        assert loaded.payload.shape == (0, 42)

    def test_frame_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        frames = (rng.standard_normal((3, 4, 8))
                  + 1j * rng.standard_normal((3, 4, 8))).astype(np.complex64)
        labels = np.array([[2, 1], [0, 0], [3, 3]], dtype=np.uint16)
        path = str(tmp_path / "frames.sds")
        write_frame_dataset(path, frames, labels, 4, 8)
        loaded = read_dataset(path)
        assert loaded.kind == 0
        assert np.array_equal(loaded.payload, frames)
        assert np.array_equal(loaded.labels, labels)

    def test_truncated_file_rejected(self, tmp_path, feature_dataset):
        path = str(tmp_path / "trunc.sds")
        write_feature_dataset(path, feature_dataset)
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[:-5])
        with pytest.raises(DataError):
            read_dataset(path)

    def test_wrong_magic_rejected(self, tmp_path):
        path = str(tmp_path / "junk.sds")
        open(path, "wb").write(b"JUNKJUNKJUNKJUNKJUNKJUNK")
        with pytest.raises(DataError):
            read_dataset(path)

    def test_frames_file_not_loadable_as_features(self, tmp_path):
        rng = np.random.default_rng(1)
        frames = (rng.standard_normal((1, 4, 8))
                  + 1j * rng.standard_normal((1, 4, 8))).astype(np.complex64)
        path = str(tmp_path / "frames.sds")
        write_frame_dataset(path, frames, np.zeros((1, 2), np.uint16), 4, 8)
        with pytest.raises(DataError):
            read_dataset(path).to_labeled()


class TestCheckpointFormat:
    def test_round_trip_preserves_predictions(self, tmp_path):
        model = build_cnndetector(30, 6, np.random.default_rng(2))
        model.epochs_seen = 5
        model.config_digest = "abc123"
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        assert loaded.architecture == "cnndetector"
        assert loaded.input_width == 30
        assert loaded.num_classes == 6
        assert loaded.epochs_seen == 5
        assert loaded.config_digest == "abc123"
        rows = np.random.default_rng(3).standard_normal((8, 30)).astype(np.float32)
        assert np.array_equal(predict_features(model, rows),
                              predict_features(loaded, rows))
        state_a = model.network.named_state()
        state_b = loaded.network.named_state()
        assert all(np.array_equal(state_a[k], state_b[k]) for k in state_a)

    def test_save_load_save_byte_identical(self, tmp_path):
        model = build_cnndetector(30, 6, np.random.default_rng(4))
        p1 = str(tmp_path / "a.ckpt")
        p2 = str(tmp_path / "b.ckpt")
        save_checkpoint(p1, model)
        save_checkpoint(p2, load_checkpoint(p1))
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_payload_corruption_detected(self, tmp_path):
        model = build_cnndetector(30, 6, np.random.default_rng(5))
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(path, model)
        blob = bytearray(open(path, "rb").read())
        blob[len(blob) // 2] ^= 0xFF  # flip a payload byte
        open(path, "wb").write(bytes(blob))
        with pytest.raises(ChecksumError):
            load_checkpoint(path)

    def test_not_a_checkpoint_rejected(self, tmp_path):
        path = str(tmp_path / "nope.ckpt")
        open(path, "wb").write(b"whatever this is")
        with pytest.raises(DataError):
            load_checkpoint(path)

    def test_radionet_round_trip(self, tmp_path):
        from srcount.detectors import build_radionet
        model = build_radionet(30, 6, np.random.default_rng(6))
        path = str(tmp_path / "r.ckpt")
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        rows = np.random.default_rng(7).standard_normal((4, 30)).astype(np.float32)
        assert np.array_equal(predict_features(model, rows),
                              predict_features(loaded, rows))
