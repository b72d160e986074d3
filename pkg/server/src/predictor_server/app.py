"""FastAPI app implementing the predictor wire protocol."""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import ServerConfig
from .engine import BudgetExceeded, ItemRequest, MaskedLMEngine, RequestError

log = logging.getLogger("predictor_server")


class WireItem(BaseModel):
    id: str
    source: str
    target_tokens: list[str]
    mask_token: str
    top_k: int = Field(default=16, ge=1)


class WireRequest(BaseModel):
    items: list[WireItem] = Field(min_length=1)


def create_app(config: ServerConfig | None = None, engine: MaskedLMEngine | None = None) -> FastAPI:
    """Build the app; the model loads eagerly unless an engine is injected."""
    app = FastAPI(title="predictor-server", docs_url=None, redoc_url=None)
    if engine is None and config is not None:
        try:
            engine = MaskedLMEngine(config)
        except Exception:
            log.exception("model %s failed to load", config.model)
            engine = None
    app.state.engine = engine

    @app.exception_handler(RequestValidationError)
    async def protocol_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.get("/healthz")
    def healthz():
        if app.state.engine is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ok"}

    @app.post("/v1/predict")
    def predict(body: WireRequest):
        if app.state.engine is None:
            return JSONResponse(status_code=503, content={"error": "model not loaded"})
        items = [
            ItemRequest(
                id=item.id,
                source=item.source,
                target_tokens=tuple(item.target_tokens),
                mask_token=item.mask_token,
                top_k=item.top_k,
            )
            for item in body.items
        ]
        try:
            predictions = app.state.engine.predict(items)
        except RequestError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        except BudgetExceeded as exc:
            return JSONResponse(status_code=413, content={"error": str(exc)})
        return {
            "items": [
                {
                    "id": item.id,
                    "predictions": [
                        {
                            "position": pred.position,
                            "candidates": [
                                {"token": token, "logprob": logprob}
                                for token, logprob in pred.candidates
                            ],
                        }
                        for pred in preds
                    ],
                }
                for item, preds in zip(items, predictions)
            ]
        }

    return app
