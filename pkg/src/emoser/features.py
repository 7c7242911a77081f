"""Log-spectrogram feature extraction.

Turns an AudioClip into the fixed-shape normalized feature tensor the models
consume: resample -> pad/trim -> windowed FFT -> dB magnitude -> bilinear
resize -> per-example standardization. Everything here is pure and
deterministic: identical bytes in, bitwise-identical tensor out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .audio_io import AudioClip, pad_or_trim, resample

DB_FLOOR = 1e-6  # magnitude floor before 20*log10; all-zero input maps to -120 dB


class FeatureError(Exception):
    """Base class for featurization failures."""


class NonPowerOfTwoLength(FeatureError):
    pass


class ClipTooShort(FeatureError):
    pass


@dataclass(frozen=True)
class StftParams:
    """Analysis window configuration. Window is periodic Hann, the only option."""

    fft_size: int = 512
    hop: int = 256

    def __post_init__(self):
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise ValueError(f"hop must be in (0, fft_size], got {self.hop}")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass(frozen=True)
class Spectrogram:
    """dB log-magnitude array, frames x bins."""

    values: np.ndarray
    params: StftParams


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the clip -> tensor pipeline; embedded in caches and checkpoints."""

    sample_rate: int = 16000
    duration_s: float = 3.0
    fft_size: int = 512
    hop: int = 256
    height: int = 64
    width: int = 64

    def __post_init__(self):
        if self.sample_rate <= 0 or self.duration_s <= 0:
            raise ValueError("sample_rate and duration_s must be positive")
        if self.height <= 0 or self.width <= 0:
            raise ValueError("feature shape must be positive")
        StftParams(self.fft_size, self.hop)  # validates fft/hop

    @property
    def stft_params(self) -> StftParams:
        return StftParams(self.fft_size, self.hop)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        raw = json.loads(text)
        unknown = set(raw) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown pipeline config keys: {sorted(unknown)}")
        return cls(**raw)


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window: w[k] = 0.5 * (1 - cos(2*pi*k/n))."""
    if n < 1:
        raise ValueError(f"window length must be >= 1, got {n}")
    k = np.arange(n, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def fft(frame: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Radix-2 decimation-in-time transform along the last axis.

    Accepts a 1-D frame or a 2-D batch of frames; length must be a power of
    two. The inverse transform divides by N.
    """
    x = np.asarray(frame, dtype=np.complex128)
    n = x.shape[-1]
    if n == 0 or n & (n - 1):
        raise NonPowerOfTwoLength(f"length {n} is not a power of two")
    levels = n.bit_length() - 1

    # bit-reversal permutation
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(levels):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    out = x[..., rev].copy()

    sign = 1.0 if inverse else -1.0
    half = 1
    while half < n:
        step = half * 2
        twiddle = np.exp(sign * 2j * np.pi * np.arange(half) / step)
        blocks = out.reshape(*out.shape[:-1], n // step, step)
        even = blocks[..., :half].copy()  # copy: the buffer is overwritten in place
        odd = blocks[..., half:] * twiddle
        blocks[..., :half] = even + odd
        blocks[..., half:] = even - odd
        half = step

    if inverse:
        out /= n
    return out


def stft(clip: AudioClip, params: StftParams) -> Spectrogram:
    """Hann-windowed magnitude STFT in dB.

    Frame t covers samples [t*hop, t*hop + fft_size); magnitudes of bins
    0..fft_size/2 are compressed by 20*log10(m + 1e-6).
    """
    n = len(clip.samples)
    if n < params.fft_size:
        raise ClipTooShort(f"clip has {n} samples, need >= {params.fft_size}")
    n_frames = 1 + (n - params.fft_size) // params.hop
    offsets = np.arange(n_frames)[:, None] * params.hop + np.arange(params.fft_size)
    frames = clip.samples.astype(np.float64)[offsets] * hann_window(params.fft_size)
    spectrum = fft(frames)[:, : params.bins]
    mag = np.abs(spectrum)
    values = 20.0 * np.log10(mag + DB_FLOOR)
    return Spectrogram(values=values, params=params)


def resize_bilinear(spec: Spectrogram | np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with a corner-aligned sampling grid.

    Accepts a Spectrogram or a bare 2-D array. Corners of the output grid
    coincide exactly with corners of the input, so corner values are
    preserved. A size-1 axis samples the first element.
    """
    values = spec.values if isinstance(spec, Spectrogram) else spec
    arr = np.asarray(values, dtype=np.float64)
    h, w = arr.shape
    if h == 0 or w == 0:
        raise ValueError("cannot resize an empty array")

    def grid(n_out: int, n_in: int) -> np.ndarray:
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out, dtype=np.float64)
        return np.arange(n_out, dtype=np.float64) * ((n_in - 1) / (n_out - 1))

    ys = grid(out_h, h)
    xs = grid(out_w, w)
    y0 = np.minimum(ys.astype(np.int64), h - 1)
    x0 = np.minimum(xs.astype(np.int64), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = arr[np.ix_(y0, x0)] * (1 - wx) + arr[np.ix_(y0, x1)] * wx
    bot = arr[np.ix_(y1, x0)] * (1 - wx) + arr[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def featurize(clip: AudioClip, cfg: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """Full clip -> feature pipeline; returns a float32 (height, width) tensor.

    Output is standardized to zero mean, unit variance per example; a
    constant pre-normalization tensor (e.g. silence) comes out all zeros.
    """
    conditioned = pad_or_trim(resample(clip, cfg.sample_rate), cfg.duration_s)
    spec = stft(conditioned, cfg.stft_params)
    resized = resize_bilinear(spec, cfg.height, cfg.width)
    std = resized.std()
    if std < 1e-8:
        return np.zeros((cfg.height, cfg.width), dtype=np.float32)
    return ((resized - resized.mean()) / std).astype(np.float32)
