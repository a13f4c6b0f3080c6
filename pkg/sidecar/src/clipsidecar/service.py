"""HTTP embedding service.

POST /embed_image takes raw image bytes, POST /embed_text takes
{"text": ...}; both return {"dim", "embedding", "model"} with unit-norm
embeddings. GET /health reports 503 until the model backend is loaded.
Responses for identical inputs are byte-identical.
"""

from __future__ import annotations

import io
import json
import threading
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, Request, Response
from PIL import Image, UnidentifiedImageError

from .backends import load_backend

MAX_IMAGE_BYTES = 20 * 1024 * 1024
MAX_TEXT_CHARS = 512

ADDR_ENV = "EBAAI_SVC_ADDR"
DEFAULT_ADDR = "127.0.0.1:8477"


def _json_response(payload: dict, status_code: int = 200) -> Response:
    return Response(
        content=json.dumps(payload, separators=(",", ":")) + "\n",
        status_code=status_code,
        media_type="application/json",
    )


def _error(status_code: int, message: str) -> Response:
    return _json_response({"error": message}, status_code)


def _embedding_response(backend, vec: np.ndarray) -> Response:
    return _json_response(
        {
            "dim": int(vec.size),
            "embedding": [float(x) for x in vec],
            "model": backend.model_id,
        }
    )


def create_app(model_id: str | None = None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        with app.state.load_lock:
            if app.state.backend is None:
                app.state.backend = load_backend(model_id)
        yield

    app = FastAPI(title="clipsidecar", lifespan=lifespan)
    app.state.backend = None
    app.state.load_lock = threading.Lock()
    # The model is not thread safe; requests serialize around it.
    app.state.model_lock = threading.Lock()

    @app.get("/health")
    async def health():
        backend = app.state.backend
        if backend is None:
            return _json_response({"status": "loading"}, 503)
        return _json_response(
            {"status": "ok", "model": backend.model_id, "dim": backend.dim}
        )

    @app.post("/embed_image")
    async def embed_image(request: Request):
        backend = app.state.backend
        if backend is None:
            return _error(503, "model loading")
        body = await request.body()
        if len(body) > MAX_IMAGE_BYTES:
            return _error(413, f"body exceeds {MAX_IMAGE_BYTES} bytes")
        try:
            with Image.open(io.BytesIO(body)) as im:
                im.load()
                with app.state.model_lock:
                    vec = backend.embed_image(im)
        except (UnidentifiedImageError, OSError, SyntaxError, ValueError):
            return _error(400, "undecodable image")
        except Exception:
            return _error(500, "model failure")
        return _embedding_response(backend, vec)

    @app.post("/embed_text")
    async def embed_text(request: Request):
        backend = app.state.backend
        if backend is None:
            return _error(503, "model loading")
        try:
            payload = json.loads(await request.body())
            text = payload["text"]
        except (json.JSONDecodeError, KeyError, TypeError):
            return _error(400, 'body must be {"text": ...}')
        if not isinstance(text, str) or not text:
            return _error(400, "text must be a non-empty string")
        if len(text) > MAX_TEXT_CHARS:
            return _error(400, f"text exceeds {MAX_TEXT_CHARS} chars")
        try:
            with app.state.model_lock:
                vec = backend.embed_text(text)
        except Exception:
            return _error(500, "model failure")
        return _embedding_response(backend, vec)

    return app
