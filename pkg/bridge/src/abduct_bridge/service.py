"""The scoring service: one endpoint, two task heads.

POST /score accepts a batch of text pairs (task "similarity", scores in
[0, 5]) or (passage, question, option) triples (task "answer", scores in
[0, 1]) and returns scores aligned with request order. GET /healthz reports
the loaded model and readiness. The service is stateless between requests;
inference runs inside the request handler.

Error contract: 400 malformed body, 413 batch too large, 503 model not
ready (clients must tolerate 503 during warmup).
"""

from __future__ import annotations

import time
from typing import Literal

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .encoders import Encoder, answer_scores, get_encoder, similarity_scores

DEFAULT_MAX_BATCH = 128


class ScoreRequest(BaseModel):
    task: Literal["similarity", "answer"]
    pairs: list[list[str]]
    model_id: str = "default"


class ScoreResponse(BaseModel):
    scores: list[float]
    model_id: str
    latency_ms: float


class HealthResponse(BaseModel):
    model_id: str | None
    ready: bool


def create_app(
    encoder: Encoder | None = None,
    *,
    backend: str = "hash",
    dim: int = 512,
    model_name: str | None = None,
    max_batch: int = DEFAULT_MAX_BATCH,
    warm: bool = True,
) -> FastAPI:
    """Build the service; with ``warm`` the encoder loads at startup,
    otherwise the first request finds the service not ready (503)."""
    app = FastAPI(title="abduct-ir-bridge")
    app.state.encoder = encoder
    app.state.max_batch = max_batch

    def load() -> None:
        if app.state.encoder is None:
            kwargs = {"dim": dim}
            if model_name:
                kwargs["model_name"] = model_name
            app.state.encoder = get_encoder(backend, **kwargs)

    if warm and encoder is None:
        load()

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        enc = app.state.encoder
        return HealthResponse(model_id=enc.model_id if enc else None, ready=enc is not None)

    @app.post("/score", response_model=ScoreResponse)
    def score(req: ScoreRequest) -> ScoreResponse:
        enc = app.state.encoder
        if enc is None:
            raise HTTPException(status_code=503, detail="model not ready")
        if len(req.pairs) > app.state.max_batch:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(req.pairs)} exceeds max {app.state.max_batch}",
            )
        arity = 2 if req.task == "similarity" else 3
        for i, item in enumerate(req.pairs):
            if len(item) != arity:
                raise HTTPException(
                    status_code=400,
                    detail=f"item {i}: task {req.task!r} needs {arity} texts, got {len(item)}",
                )
            if any(not text for text in item):
                raise HTTPException(status_code=400, detail=f"item {i}: empty text")

        start = time.perf_counter()
        if req.task == "similarity":
            scores = similarity_scores(enc, [(a, b) for a, b in req.pairs])
        else:
            scores = answer_scores(enc, [(p, q, o) for p, q, o in req.pairs])
        latency_ms = (time.perf_counter() - start) * 1000.0
        return ScoreResponse(scores=scores, model_id=enc.model_id, latency_ms=latency_ms)

    return app
