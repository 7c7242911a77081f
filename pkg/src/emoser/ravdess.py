"""RAVDESS speech corpus handling.

Decodes the 7-part numeric filename identifier, scans a staged corpus into
labeled paths with a census, splits deterministically, and round-trips
feature tensors through a self-describing binary cache.
"""

from __future__ import annotations

import json
import struct
import zipfile
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .features import PipelineConfig
from .nn.rng import SeededRng

CACHE_MAGIC = b"SERFEAT1"
CACHE_VERSION = 1


class RavdessError(Exception):
    """Base class for corpus failures."""


class BadPartCount(RavdessError):
    pass


class NonNumericPart(RavdessError):
    pass


class CodeOutOfRange(RavdessError):
    def __init__(self, fld: str, value: int):
        super().__init__(f"{fld} code {value} out of range")
        self.field = fld
        self.value = value


class NeutralStrongConflict(RavdessError):
    """Neutral emotion recordings exist only at normal intensity."""


class RootNotFound(RavdessError):
    pass


class BadArchive(RavdessError):
    pass


class CacheError(RavdessError):
    pass


class BadMagic(CacheError):
    pass


class VersionMismatch(CacheError):
    pass


class TruncatedFile(CacheError):
    pass


class Modality(IntEnum):
    FULL_AV = 1
    VIDEO_ONLY = 2
    AUDIO_ONLY = 3


class Channel(IntEnum):
    SPEECH = 1
    SONG = 2


class Emotion(IntEnum):
    NEUTRAL = 1
    CALM = 2
    HAPPY = 3
    SAD = 4
    ANGRY = 5
    FEARFUL = 6
    DISGUST = 7
    SURPRISED = 8


class Intensity(IntEnum):
    NORMAL = 1
    STRONG = 2


class Statement(IntEnum):
    KIDS = 1
    DOGS = 2


class Gender(IntEnum):
    MALE = 1
    FEMALE = 2


EMOTION_NAMES = ["neutral", "calm", "happy", "sad", "angry", "fearful",
                 "disgust", "surprised"]
NUM_CLASSES = len(EMOTION_NAMES)


@dataclass(frozen=True)
class RavdessMeta:
    """Decoded 7-part filename identifier."""

    modality: Modality
    channel: Channel
    emotion: Emotion
    intensity: Intensity
    statement: Statement
    repetition: int
    actor: int

    @property
    def gender(self) -> Gender:
        return Gender.MALE if self.actor % 2 == 1 else Gender.FEMALE

    @property
    def label(self) -> int:
        """Zero-based class index: emotion code minus one."""
        return int(self.emotion) - 1


_FIELDS = (
    ("modality", 1, 3),
    ("channel", 1, 2),
    ("emotion", 1, 8),
    ("intensity", 1, 2),
    ("statement", 1, 2),
    ("repetition", 1, 2),
    ("actor", 1, 24),
)


def parse_filename(name: str) -> RavdessMeta:
    """Decode DD-DD-DD-DD-DD-DD-DD.wav into its seven coded fields."""
    stem = name[:-4] if name.lower().endswith(".wav") else name
    parts = stem.split("-")
    if len(parts) != 7:
        raise BadPartCount(f"{name!r}: expected 7 parts, got {len(parts)}")
    codes = []
    for (fld, lo, hi), part in zip(_FIELDS, parts):
        if len(part) != 2 or not part.isdigit():
            raise NonNumericPart(f"{name!r}: part {part!r} is not two decimal digits")
        value = int(part)
        if not lo <= value <= hi:
            raise CodeOutOfRange(fld, value)
        codes.append(value)
    meta = RavdessMeta(
        modality=Modality(codes[0]),
        channel=Channel(codes[1]),
        emotion=Emotion(codes[2]),
        intensity=Intensity(codes[3]),
        statement=Statement(codes[4]),
        repetition=codes[5],
        actor=codes[6],
    )
    if meta.emotion == Emotion.NEUTRAL and meta.intensity == Intensity.STRONG:
        raise NeutralStrongConflict(f"{name!r}: neutral has no strong intensity")
    return meta


def render_filename(meta: RavdessMeta) -> str:
    """Inverse of parse_filename."""
    codes = (meta.modality, meta.channel, meta.emotion, meta.intensity,
             meta.statement, meta.repetition, meta.actor)
    return "-".join(f"{int(c):02d}" for c in codes) + ".wav"


@dataclass
class Census:
    """Per-field counts over the scanned corpus."""

    total: int = 0
    by_emotion: dict = field(default_factory=lambda: {n: 0 for n in EMOTION_NAMES})
    by_actor: dict = field(default_factory=lambda: {a: 0 for a in range(1, 25)})
    by_intensity: dict = field(default_factory=lambda: {"normal": 0, "strong": 0})
    warnings: list = field(default_factory=list)

    def add(self, meta: RavdessMeta) -> None:
        self.total += 1
        self.by_emotion[EMOTION_NAMES[meta.label]] += 1
        self.by_actor[meta.actor] += 1
        self.by_intensity["normal" if meta.intensity == Intensity.NORMAL else "strong"] += 1


def scan_corpus(root: str | Path) -> tuple[list[tuple[Path, RavdessMeta]], Census]:
    """Collect audio-only speech files under root, recursively.

    Unparseable names and non speech-channel files are recorded as census
    warnings, never silently dropped. Output is sorted by path so downstream
    seeded shuffles are independent of filesystem enumeration order.
    """
    root = Path(root)
    if not root.is_dir():
        raise RootNotFound(str(root))
    census = Census()
    found: list[tuple[Path, RavdessMeta]] = []
    for path in sorted(root.rglob("*.wav")):
        try:
            meta = parse_filename(path.name)
        except RavdessError as exc:
            census.warnings.append(f"{path}: {exc}")
            continue
        if meta.modality != Modality.AUDIO_ONLY or meta.channel != Channel.SPEECH:
            census.warnings.append(f"{path}: skipped, not audio-only speech")
            continue
        found.append((path, meta))
        census.add(meta)
    return found, census


@dataclass
class StagingReport:
    count: int
    census: Census
    dest: Path


def stage_archive(archive: str | Path, dest: str | Path) -> StagingReport:
    """Extract a user-supplied corpus ZIP and scan the result."""
    dest = Path(dest)
    try:
        with zipfile.ZipFile(archive) as zf:
            zf.extractall(dest)
    except (zipfile.BadZipFile, FileNotFoundError) as exc:
        raise BadArchive(str(exc)) from exc
    except OSError as exc:
        raise RavdessError(f"extraction failed: {exc}") from exc
    _, census = scan_corpus(dest)
    return StagingReport(count=census.total, census=census, dest=dest)


@dataclass
class LabeledExample:
    """Feature tensor plus its provenance."""

    features: np.ndarray
    label: int
    meta: RavdessMeta
    path: str


@dataclass
class DatasetSplit:
    train: list[LabeledExample]
    test: list[LabeledExample]
    seed: int
    ratio: float


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_dataset(examples: list[LabeledExample], ratio: float, seed: int,
                  strategy: str = "stratified") -> DatasetSplit:
    """Deterministic train/test partition.

    stratified: within each emotion, shuffle with the seeded PRNG and take
    round(ratio * n_e) for train. speaker: shuffle actors and assign whole
    actors to train until it holds at least ratio * N examples.
    """
    if not examples:
        raise ValueError("cannot split an empty example list")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    ordered = sorted(examples, key=lambda ex: ex.path)
    rng = SeededRng(seed)
    train: list[LabeledExample] = []
    test: list[LabeledExample] = []

    if strategy == "stratified":
        for label in range(NUM_CLASSES):
            bucket = [ex for ex in ordered if ex.label == label]
            rng.shuffle(bucket)
            k = _round_half_up(ratio * len(bucket))
            train.extend(bucket[:k])
            test.extend(bucket[k:])
    elif strategy == "speaker":
        actors = sorted({ex.meta.actor for ex in ordered})
        rng.shuffle(actors)
        target = ratio * len(ordered)
        chosen: set[int] = set()
        count = 0
        for actor in actors:
            if count >= target:
                break
            chosen.add(actor)
            count += sum(1 for ex in ordered if ex.meta.actor == actor)
        train = [ex for ex in ordered if ex.meta.actor in chosen]
        test = [ex for ex in ordered if ex.meta.actor not in chosen]
    else:
        raise ValueError(f"unknown split strategy {strategy!r}")
    return DatasetSplit(train=train, test=test, seed=seed, ratio=ratio)


def write_feature_cache(examples: list[LabeledExample], path: str | Path,
                        cfg: PipelineConfig) -> None:
    """Write the binary feature cache (see format notes in read_feature_cache)."""
    if not examples:
        raise ValueError("refusing to write an empty cache")
    h, w = examples[0].features.shape
    cfg_bytes = cfg.to_json().encode("utf-8")
    with open(path, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(struct.pack("<IIIII", CACHE_VERSION, len(examples), h, w, len(cfg_bytes)))
        f.write(cfg_bytes)
        for ex in examples:
            if ex.features.shape != (h, w):
                raise ValueError("inconsistent feature shapes in cache write")
            f.write(struct.pack("<BBBB", ex.label, ex.meta.actor, int(ex.meta.intensity), 0))
            f.write(np.ascontiguousarray(ex.features, dtype="<f4").tobytes())


def read_feature_cache(path: str | Path) -> tuple[list[LabeledExample], PipelineConfig]:
    """Read a cache written by write_feature_cache.

    Layout, little-endian: magic "SERFEAT1", u32 version, u32 n_examples,
    u32 H, u32 W, u32 config-JSON length, config JSON, then per example
    u8 label, u8 actor, u8 intensity, u8 reserved, H*W float32.

    Cached examples carry reduced metadata (emotion, actor, intensity);
    statement and repetition are not stored and default to 1.
    """
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:8] != CACHE_MAGIC:
        raise BadMagic(f"{path}: not a feature cache")
    if len(data) < 28:
        raise TruncatedFile(f"{path}: header truncated")
    version, n, h, w, cfg_len = struct.unpack_from("<IIIII", data, 8)
    if version != CACHE_VERSION:
        raise VersionMismatch(f"{path}: cache version {version}, expected {CACHE_VERSION}")
    pos = 28
    if len(data) < pos + cfg_len:
        raise TruncatedFile(f"{path}: config truncated")
    cfg = PipelineConfig.from_json(data[pos : pos + cfg_len].decode("utf-8"))
    pos += cfg_len
    record = 4 + h * w * 4
    if len(data) < pos + n * record:
        raise TruncatedFile(f"{path}: expected {n} examples, payload short")
    examples = []
    for i in range(n):
        label, actor, intensity, _ = struct.unpack_from("<BBBB", data, pos)
        pos += 4
        feats = np.frombuffer(data, dtype="<f4", count=h * w, offset=pos).reshape(h, w)
        pos += h * w * 4
        meta = RavdessMeta(
            modality=Modality.AUDIO_ONLY, channel=Channel.SPEECH,
            emotion=Emotion(label + 1), intensity=Intensity(intensity),
            statement=Statement.KIDS, repetition=1, actor=actor,
        )
        examples.append(LabeledExample(features=feats.copy(), label=label,
                                       meta=meta, path=f"cache:{i}"))
    return examples, cfg
