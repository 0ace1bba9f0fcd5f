"""HTTP surface: POST /embed and GET /healthz.

Responses keep request order; a batch above max_batch is refused whole
(HTTP 413) so a client never sees partial results. Every error payload
is {"error": message}.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import normalize_rows


class EmbedRequest(BaseModel):
    texts: list[str]


def create_app(backend, max_batch: int = 32) -> FastAPI:
    app = FastAPI(title="embed-service", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request, exc):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def internal_error(request, exc):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "dim": backend.dim, "model": backend.model_name}

    @app.post("/embed")
    def embed(request: EmbedRequest):
        if not request.texts:
            return JSONResponse(status_code=422, content={"error": "texts must be non-empty"})
        if len(request.texts) > max_batch:
            return JSONResponse(
                status_code=413,
                content={"error": f"batch of {len(request.texts)} exceeds max_batch={max_batch}"},
            )
        embeddings = normalize_rows(backend.embed(request.texts))
        return {"dim": backend.dim, "embeddings": embeddings}

    return app
