"""Speech emotion recognition toolkit.

Library surface: WAV decoding and conditioning (audio_io), log-spectrogram
features (features), corpus handling (ravdess), the layer engine (nn), model
assembly and checkpoints (models), training and metrics (train_eval), plus a
CLI (cli) and HTTP service (serve).
"""

__version__ = "0.1.0"
