"""HTTP inference service.

Exposes a loaded checkpoint behind three endpoints and optionally hosts the
static web UI bundle. The model is loaded once and only read afterwards, so
concurrent identical requests produce identical bodies.
"""

from __future__ import annotations

import json
import uuid
from pathlib import Path

from fastapi import FastAPI, Request, Response

from . import audio_io
from .models import Model, checkpoint_model_id, load_checkpoint, predict
from .ravdess import EMOTION_NAMES

MAX_BODY_BYTES = 10 * 1024 * 1024

_WAV_CONTENT_TYPES = {"audio/wav", "audio/x-wav", "audio/wave",
                      "application/octet-stream"}


def _json_response(payload: dict, status_code: int = 200) -> Response:
    # fixed serialization so repeated identical requests are byte-identical
    return Response(content=json.dumps(payload), status_code=status_code,
                    media_type="application/json")


def _error(status_code: int, code: str) -> Response:
    return _json_response({"error": code}, status_code)


def create_app(checkpoint: str | Path, static_dir: str | Path | None = None) -> FastAPI:
    model: Model = load_checkpoint(checkpoint)
    model_id = checkpoint_model_id(checkpoint)
    app = FastAPI(title="emoser", docs_url=None, redoc_url=None)

    @app.get("/api/health")
    def health() -> Response:
        return _json_response({"status": "ok", "model_id": model_id})

    @app.get("/api/labels")
    def labels() -> Response:
        return _json_response(EMOTION_NAMES)

    @app.post("/api/predict")
    async def predict_endpoint(request: Request) -> Response:
        content_type = (request.headers.get("content-type") or "").split(";")[0].strip()
        if content_type and content_type not in _WAV_CONTENT_TYPES:
            return _error(400, "unsupported_format")
        body = await request.body()
        if len(body) > MAX_BODY_BYTES:
            return _error(413, "payload_too_large")
        if len(body) < 12 or body[0:4] != b"RIFF" or body[8:12] != b"WAVE":
            return _error(400, "unsupported_format")
        try:
            clip = audio_io.read_wav(body)
        except audio_io.UnsupportedFormat:
            return _error(400, "unsupported_format")
        except audio_io.AudioError:
            return _error(400, "malformed_wav")
        try:
            scores = predict(model, clip, model.pipeline)
        except Exception:
            return _error(500, f"internal:{uuid.uuid4().hex[:12]}")
        return _json_response({
            "scores": [{"label": label, "probability": prob}
                       for label, prob in zip(scores.labels, scores.probabilities)],
            "top": scores.top,
            "model_id": model_id,
        })

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="static")
    return app


def run(checkpoint: str | Path, host: str, port: int,
        static_dir: str | Path | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(checkpoint, static_dir), host=host, port=port)
