"""Model assembly, checkpointing and single-clip prediction.

Two architectures: the two-stage conv stack (conv 32@2x2 -> pool -> dropout
0.25 -> conv 64@3x3 -> pool -> dropout 0.25 -> flatten -> dense 128 ->
dropout 0.5 -> dense K softmax) and a plain MLP baseline for comparison.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioClip
from .features import PipelineConfig, featurize
from .nn import (Conv2D, Dense, Dropout, Flatten, Layer, MaxPool2D, ReLU,
                 SeededRng, Softmax)
from .ravdess import EMOTION_NAMES

CHECKPOINT_MAGIC = b"SERMODL1"
CHECKPOINT_VERSION = 1


class ModelError(Exception):
    pass


class InputTooSmall(ModelError):
    pass


class BadMagic(ModelError):
    pass


class VersionMismatch(ModelError):
    pass


class ShapeMismatchOnLoad(ModelError):
    pass


class TruncatedFile(ModelError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    kind: str  # "cnn" | "dnn"
    input_shape: tuple[int, int]
    num_classes: int = 8


@dataclass(frozen=True)
class EmotionScores:
    """Labeled class probabilities in fixed code order plus the argmax label."""

    labels: tuple[str, ...]
    probabilities: tuple[float, ...]

    @property
    def top(self) -> str:
        return self.labels[int(np.argmax(self.probabilities))]


class Model:
    def __init__(self, spec: ModelSpec, layers: list[Layer],
                 pipeline: PipelineConfig | None = None):
        self.spec = spec
        self.layers = layers
        self.pipeline = pipeline if pipeline is not None else PipelineConfig()

    def describe_layers(self) -> list[str]:
        return [layer.describe() for layer in self.layers]

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def param_count(self) -> int:
        return sum(p.value.size for p in self.params())

    def forward_logits(self, x: np.ndarray, train: bool = False,
                       rng: SeededRng | None = None) -> np.ndarray:
        """Run every layer except the terminal softmax on a (N, H, W) batch."""
        x = np.asarray(x, dtype=np.float32)
        out = x[..., None] if x.ndim == 3 else x
        for layer in self.layers[:-1]:
            out = layer.forward(out, train=train, rng=rng)
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode probabilities for a batch (N, H, W) or single (H, W) tensor."""
        x = np.asarray(x, dtype=np.float32)
        single = x.ndim == 2
        if single:
            x = x[None, ...]
        if x.shape[1:] != self.spec.input_shape:
            raise ModelError(f"expected input {self.spec.input_shape}, got {x.shape[1:]}")
        out = x[..., None]  # single feature channel
        for layer in self.layers:
            out = layer.forward(out, train=False, rng=None)
        return out[0] if single else out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        out = grad
        for layer in reversed(self.layers[:-1]):
            out = layer.backward(out)
        return out


def _conv_output(h: int, w: int) -> tuple[int, int, int]:
    """Shape algebra for the conv stack on an (h, w) input; returns flatten dims."""
    h, w = h - 1, w - 1        # conv 2x2 valid
    h, w = h // 2, w // 2      # pool
    h, w = h - 2, w - 2        # conv 3x3 valid
    h, w = h // 2, w // 2      # pool
    return h, w, 64


def build_cnn(input_shape: tuple[int, int], num_classes: int = 8,
              rng: SeededRng | None = None,
              pipeline: PipelineConfig | None = None, dtype=np.float32) -> Model:
    """The ten-stage conv stack.

    Needs at least 9x9 input: 9 -> 8 -> 4 -> 2 -> 1 is the smallest chain
    that satisfies every conv/pool precondition.
    """
    h, w = input_shape
    if h < 9 or w < 9:
        raise InputTooSmall(f"input {h}x{w} cannot survive two conv+pool stages")
    rng = rng if rng is not None else SeededRng(0)
    fh, fw, fc = _conv_output(h, w)
    flat = fh * fw * fc
    layers: list[Layer] = [
        Conv2D(2, 2, 1, 32, rng, dtype=dtype),
        ReLU(),
        MaxPool2D(),
        Dropout(0.25),
        Conv2D(3, 3, 32, 64, rng, dtype=dtype),
        ReLU(),
        MaxPool2D(),
        Dropout(0.25),
        Flatten(),
        Dense(flat, 128, rng, init="he", dtype=dtype),
        ReLU(),
        Dropout(0.5),
        Dense(128, num_classes, rng, init="glorot", dtype=dtype),
        Softmax(),
    ]
    return Model(ModelSpec("cnn", (h, w), num_classes), layers, pipeline)


def build_dnn(input_shape: tuple[int, int], num_classes: int = 8,
              rng: SeededRng | None = None,
              pipeline: PipelineConfig | None = None, dtype=np.float32) -> Model:
    """MLP baseline: flatten -> dense 256 -> dropout 0.5 -> dense 128 -> dense K."""
    h, w = input_shape
    rng = rng if rng is not None else SeededRng(0)
    layers: list[Layer] = [
        Flatten(),
        Dense(h * w, 256, rng, init="he", dtype=dtype),
        ReLU(),
        Dropout(0.5),
        Dense(256, 128, rng, init="he", dtype=dtype),
        ReLU(),
        Dense(128, num_classes, rng, init="glorot", dtype=dtype),
        Softmax(),
    ]
    return Model(ModelSpec("dnn", (h, w), num_classes), layers, pipeline)


def build_model(kind: str, input_shape: tuple[int, int], num_classes: int = 8,
                rng: SeededRng | None = None,
                pipeline: PipelineConfig | None = None) -> Model:
    if kind == "cnn":
        return build_cnn(input_shape, num_classes, rng, pipeline)
    if kind == "dnn":
        return build_dnn(input_shape, num_classes, rng, pipeline)
    raise ValueError(f"unknown model kind {kind!r}")


def save_checkpoint(model: Model, path: str | Path) -> None:
    """Binary checkpoint: magic, version, spec JSON, raw float32 parameters.

    Parameters are written in layer order, weights before biases, so the
    payload length is fully determined by the spec header.
    """
    spec_json = json.dumps({
        "kind": model.spec.kind,
        "input_shape": list(model.spec.input_shape),
        "num_classes": model.spec.num_classes,
        "pipeline": json.loads(model.pipeline.to_json()),
    }, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(spec_json)))
        f.write(spec_json)
        for p in model.params():
            f.write(np.ascontiguousarray(p.value, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> Model:
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:8] != CHECKPOINT_MAGIC:
        raise BadMagic(f"{path}: not a model checkpoint")
    if len(data) < 16:
        raise TruncatedFile(f"{path}: header truncated")
    version, spec_len = struct.unpack_from("<II", data, 8)
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {CHECKPOINT_VERSION}")
    pos = 16
    if len(data) < pos + spec_len:
        raise TruncatedFile(f"{path}: spec truncated")
    try:
        raw = json.loads(data[pos : pos + spec_len].decode("utf-8"))
        kind = raw["kind"]
        input_shape = tuple(raw["input_shape"])
        num_classes = raw["num_classes"]
        pipeline = PipelineConfig.from_json(json.dumps(raw["pipeline"]))
    except (ValueError, KeyError, TypeError) as exc:
        raise ShapeMismatchOnLoad(f"{path}: bad spec block: {exc}") from exc
    pos += spec_len

    model = build_model(kind, input_shape, num_classes, SeededRng(0), pipeline)
    for p in model.params():
        nbytes = p.value.size * 4
        if len(data) < pos + nbytes:
            raise TruncatedFile(f"{path}: parameter payload short")
        loaded = np.frombuffer(data, dtype="<f4", count=p.value.size, offset=pos)
        p.value[...] = loaded.reshape(p.value.shape)
        pos += nbytes
    if pos != len(data):
        raise ShapeMismatchOnLoad(f"{path}: {len(data) - pos} trailing bytes")
    return model


def checkpoint_model_id(path: str | Path) -> str:
    """Content hash of a checkpoint file, for provenance display."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def predict(model: Model, clip: AudioClip, cfg: PipelineConfig) -> EmotionScores:
    """Featurize a clip and return Eval-mode emotion probabilities."""
    probs = model.forward(featurize(clip, cfg))
    return EmotionScores(labels=tuple(EMOTION_NAMES),
                         probabilities=tuple(float(p) for p in probs))
