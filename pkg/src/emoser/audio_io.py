"""WAV decoding and signal conditioning.

Decodes RIFF/WAVE PCM16 containers into normalized mono float32 buffers and
conditions them (linear resample, center pad/trim) for featurization. No
external codec dependencies.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


class AudioError(Exception):
    """Base class for audio decoding failures."""


class MalformedRiff(AudioError):
    """Container structure is not a parseable RIFF/WAVE file."""


class UnsupportedFormat(AudioError):
    """Valid container but not PCM 16-bit, 1-2 channels."""


class EmptyAudio(AudioError):
    """Data chunk holds zero samples."""


@dataclass(frozen=True)
class AudioClip:
    """Mono float32 samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int
    source_name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(data: bytes, source_name: str | None = None) -> AudioClip:
    """Decode PCM16 RIFF/WAVE bytes to a mono AudioClip.

    Int16 values map to floats by v/32768; multi-channel input is averaged
    down to mono. Raises MalformedRiff, UnsupportedFormat or EmptyAudio.
    """
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedRiff("missing RIFF/WAVE magic")

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedRiff("fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise MalformedRiff("data chunk truncated")
            pcm = body
        # chunks are word-aligned: odd sizes carry a pad byte
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise MalformedRiff("no fmt chunk")
    if pcm is None:
        raise MalformedRiff("no data chunk")

    format_code, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if format_code != 1:
        raise UnsupportedFormat(f"format code {format_code}, only PCM (1) supported")
    if bits != 16:
        raise UnsupportedFormat(f"bit depth {bits}, only 16-bit supported")
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{channels} channels, only 1-2 supported")
    if sample_rate <= 0:
        raise MalformedRiff(f"bad sample rate {sample_rate}")

    frames = len(pcm) // (2 * channels)
    if frames == 0:
        raise EmptyAudio("zero data samples")
    ints = np.frombuffer(pcm[: frames * 2 * channels], dtype="<i2")
    samples = ints.astype(np.float32) / 32768.0
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples=samples.astype(np.float32), sample_rate=sample_rate,
                     source_name=source_name)


def write_wav(clip: AudioClip) -> bytes:
    """Encode a clip as mono PCM16 RIFF/WAVE bytes (inverse of read_wav)."""
    scaled = np.clip(np.round(clip.samples.astype(np.float64) * 32768.0), -32768, 32767)
    pcm = scaled.astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, 1, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16,
        b"data", len(pcm),
    )
    return header + pcm


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resample to target_rate.

    Output length is round(n * target_rate / source_rate). With equal rates
    this is the exact identity. Aliasing above target Nyquist is accepted;
    speech content below 8 kHz survives the default 48k -> 16k path.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    n = len(clip.samples)
    m = int(round(n * target_rate / clip.sample_rate))
    src_pos = np.arange(m, dtype=np.float64) * (clip.sample_rate / target_rate)
    out = np.interp(src_pos, np.arange(n, dtype=np.float64),
                    clip.samples.astype(np.float64))
    return AudioClip(samples=out.astype(np.float32), sample_rate=target_rate,
                     source_name=clip.source_name)


def pad_or_trim(clip: AudioClip, duration_s: float) -> AudioClip:
    """Force the clip to round(duration_s * rate) samples.

    Longer clips are center-cropped; shorter ones zero-padded symmetrically,
    with the extra sample on the right when the deficit is odd.
    """
    if duration_s <= 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")
    m = int(round(duration_s * clip.sample_rate))
    n = len(clip.samples)
    if m == n:
        return clip
    if n > m:
        start = (n - m) // 2
        out = clip.samples[start : start + m]
    else:
        left = (m - n) // 2
        out = np.zeros(m, dtype=np.float32)
        out[left : left + n] = clip.samples
    return AudioClip(samples=np.ascontiguousarray(out, dtype=np.float32),
                     sample_rate=clip.sample_rate, source_name=clip.source_name)
