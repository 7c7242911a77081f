import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import generate_corpus, synth_clip  # noqa: E402
from emoser.audio_io import write_wav  # noqa: E402
from emoser.ravdess import parse_filename  # noqa: E402

FIXTURE_NAME = "03-01-06-01-02-01-12.wav"


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory) -> Path:
    """Full 1440-file synthetic speech corpus, generated once per session."""
    root = tmp_path_factory.mktemp("corpus")
    generate_corpus(root)
    return root


@pytest.fixture(scope="session")
def fixture_wav_bytes() -> bytes:
    """The worked-example recording (fearful, actor 12) as WAV bytes."""
    return write_wav(synth_clip(parse_filename(FIXTURE_NAME)))
