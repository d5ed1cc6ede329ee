"""FastAPI application implementing the embedding wire protocol."""

from __future__ import annotations

import io
import threading
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image as PILImage, UnidentifiedImageError
from pydantic import BaseModel

from .backends import load_backend
from .config import ServiceConfig


class EmbedResponse(BaseModel):
    embedding: list[float]
    dim: int
    model: str


class HealthResponse(BaseModel):
    status: str
    model: str


def create_app(config: ServiceConfig) -> FastAPI:
    def _load():
        try:
            app.state.backend = load_backend(config.model_name, config.device)
        except Exception as e:  # surfaced through /healthz, keeps serving 503
            app.state.load_error = str(e)

    @asynccontextmanager
    async def lifespan(_app):
        threading.Thread(target=_load, daemon=True).start()
        yield

    app = FastAPI(title="embed-service", lifespan=lifespan)
    app.state.config = config
    app.state.backend = None
    app.state.load_error = None
    app.state.encode_lock = threading.Lock()

    def _not_ready() -> JSONResponse:
        detail = app.state.load_error or "model loading"
        return JSONResponse({"status": "unavailable", "detail": detail}, status_code=503)

    @app.get("/healthz", response_model=HealthResponse, responses={503: {}})
    def healthz():
        backend = app.state.backend
        if backend is None:
            return _not_ready()
        return HealthResponse(status="ok", model=backend.name)

    @app.post("/embed", response_model=EmbedResponse, responses={400: {}, 413: {}, 503: {}})
    async def embed(request: Request):
        backend = app.state.backend
        if backend is None:
            return _not_ready()
        body = await request.body()
        if len(body) > config.max_image_bytes:
            return JSONResponse(
                {"detail": f"image larger than {config.max_image_bytes} bytes"},
                status_code=413,
            )
        try:
            img = PILImage.open(io.BytesIO(body))
            img.load()
        except (UnidentifiedImageError, OSError, ValueError):
            return JSONResponse({"detail": "body is not a decodable image"}, status_code=400)
        with app.state.encode_lock:
            vec = np.asarray(backend.encode(img), dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec = vec / norm
        return EmbedResponse(embedding=vec.tolist(), dim=int(vec.size), model=backend.name)

    return app
