import numpy as np
import pytest

from emoser.audio_io import read_wav
from emoser.features import PipelineConfig
from emoser.models import (BadMagic, EmotionScores, InputTooSmall,
                           TruncatedFile, VersionMismatch, build_cnn,
                           build_dnn, checkpoint_model_id, load_checkpoint,
                           predict, save_checkpoint)
from emoser.nn import SeededRng
from emoser.ravdess import EMOTION_NAMES

EXPECTED_STACK = [
    "conv 32@2x2", "relu", "maxpool 2x2", "dropout 0.25",
    "conv 64@3x3", "relu", "maxpool 2x2", "dropout 0.25",
    "flatten", "dense 128", "relu", "dropout 0.5", "dense 8", "softmax",
]


class TestBuildCnn:
    def test_structural_audit(self):
        model = build_cnn((64, 64), 8, SeededRng(0))
        assert model.describe_layers() == EXPECTED_STACK

    def test_flatten_width_64(self):
        model = build_cnn((64, 64), 8, SeededRng(0))
        dense = model.layers[9]
        assert dense.n == 14 * 14 * 64 == 12544

    def test_parameter_count(self):
        model = build_cnn((64, 64), 8, SeededRng(0))
        counts = [p.value.size for p in model.params()]
        # conv1 (w, b), conv2, dense1, dense2
        assert counts == [128, 32, 18432, 64, 1605632, 128, 1024, 8]
        assert model.param_count() == 1_625_448
        assert 160 + 18496 + 1605760 + 1032 == 1_625_448

    def test_minimal_input_flattens_to_64(self):
        # smallest chain satisfying every layer precondition: 9 -> 8 -> 4 -> 2 -> 1
        model = build_cnn((9, 9), 8, SeededRng(0))
        assert model.layers[9].n == 1 * 1 * 64

    def test_too_small_input(self):
        with pytest.raises(InputTooSmall):
            build_cnn((8, 8), 8, SeededRng(0))


class TestBuildDnn:
    def test_first_dense_width(self):
        model = build_dnn((64, 64), 8, SeededRng(0))
        assert model.layers[1].n == 4096
        assert model.layers[1].m == 256

    def test_output_sums_to_one(self):
        model = build_dnn((64, 64), 8, SeededRng(1))
        probs = model.forward(np.random.default_rng(0)
                              .standard_normal((64, 64)).astype(np.float32))
        assert probs.shape == (8,)
        assert probs.sum() == pytest.approx(1.0, abs=1e-5)

    def test_same_seed_same_init(self):
        a = build_dnn((16, 16), 8, SeededRng(5))
        b = build_dnn((16, 16), 8, SeededRng(5))
        for pa, pb in zip(a.params(), b.params()):
            assert pa.value.tobytes() == pb.value.tobytes()


class TestForward:
    def test_no_class_bias_at_init(self):
        # symmetry check: averaged over inits, no class is systematically
        # favored before training (per-row spread is wide; see ledger)
        rng = np.random.default_rng(0)
        total = np.zeros(8)
        for seed in range(100):
            model = build_cnn((16, 16), 8, SeededRng(seed))
            x = rng.standard_normal((16, 16)).astype(np.float32)
            probs = model.forward(x)
            assert probs.sum() == pytest.approx(1.0, abs=1e-5)
            assert np.all(probs >= 0.0)
            total += probs
        mean = total / 100
        assert np.all(mean > 0.04) and np.all(mean < 0.28)

    def test_eval_deterministic(self):
        model = build_cnn((32, 32), 8, SeededRng(2))
        x = np.random.default_rng(1).standard_normal((32, 32)).astype(np.float32)
        assert model.forward(x).tobytes() == model.forward(x).tobytes()

    def test_batch_shape(self):
        model = build_cnn((16, 16), 8, SeededRng(3))
        x = np.random.default_rng(2).standard_normal((3, 16, 16)).astype(np.float32)
        probs = model.forward(x)
        assert probs.shape == (3, 8)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-5)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        model = build_cnn((16, 16), 8, SeededRng(4))
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        x = np.random.default_rng(3).standard_normal((5, 16, 16)).astype(np.float32)
        assert model.forward(x).tobytes() == loaded.forward(x).tobytes()
        assert loaded.spec == model.spec

    def test_payload_float_count(self, tmp_path):
        model = build_cnn((64, 64), 8, SeededRng(0))
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        data = path.read_bytes()
        import struct
        _, spec_len = struct.unpack_from("<II", data, 8)
        payload = len(data) - 16 - spec_len
        assert payload == 1_625_448 * 4

    def test_truncated(self, tmp_path):
        model = build_cnn((16, 16), 8, SeededRng(0))
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(TruncatedFile):
            load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"WRONG!!!" + b"\x00" * 100)
        with pytest.raises(BadMagic):
            load_checkpoint(path)

    def test_version_mismatch(self, tmp_path):
        model = build_cnn((16, 16), 8, SeededRng(0))
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        data = bytearray(path.read_bytes())
        data[8] = 42
        path.write_bytes(bytes(data))
        with pytest.raises(VersionMismatch):
            load_checkpoint(path)

    def test_pipeline_config_survives(self, tmp_path):
        cfg = PipelineConfig(sample_rate=8000, height=16, width=16)
        model = build_cnn((16, 16), 8, SeededRng(0), pipeline=cfg)
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        assert load_checkpoint(path).pipeline == cfg

    def test_model_id_is_content_hash(self, tmp_path):
        model = build_cnn((16, 16), 8, SeededRng(0))
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(model, p1)
        save_checkpoint(model, p2)
        assert checkpoint_model_id(p1) == checkpoint_model_id(p2)
        assert len(checkpoint_model_id(p1)) == 64


class TestPredict:
    def test_scores_contract(self, fixture_wav_bytes):
        cfg = PipelineConfig()
        model = build_cnn((64, 64), 8, SeededRng(1), pipeline=cfg)
        scores = predict(model, read_wav(fixture_wav_bytes), cfg)
        assert scores.labels == tuple(EMOTION_NAMES)
        assert len(scores.probabilities) == 8
        assert sum(scores.probabilities) == pytest.approx(1.0, abs=1e-5)
        assert scores.top in EMOTION_NAMES

    def test_top_is_argmax(self):
        scores = EmotionScores(labels=tuple(EMOTION_NAMES),
                               probabilities=(0.05, 0.1, 0.4, 0.05, 0.1, 0.1, 0.1, 0.1))
        assert scores.top == "happy"

    def test_identical_clip_identical_scores(self, fixture_wav_bytes):
        cfg = PipelineConfig()
        model = build_cnn((64, 64), 8, SeededRng(2), pipeline=cfg)
        a = predict(model, read_wav(fixture_wav_bytes), cfg)
        b = predict(model, read_wav(bytes(fixture_wav_bytes)), cfg)
        assert a.probabilities == b.probabilities
