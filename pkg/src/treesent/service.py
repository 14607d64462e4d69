"""FastAPI service wrapping the toolkit: train, evaluate, dump attention,
and gradient-check, all stateless per request."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .runs import run_attention, run_eval, run_gradcheck, run_train
from .schemas import (
    AttentionRequest,
    AttentionResponse,
    EvalRequest,
    EvalResponse,
    GradcheckRequest,
    GradcheckResponse,
    HealthResponse,
    TrainRequest,
    TrainResponse,
)

__all__ = ["create_app", "app"]


def create_app() -> FastAPI:
    app = FastAPI(title="treesent", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/train", response_model=TrainResponse)
    def train_endpoint(req: TrainRequest) -> TrainResponse:
        return _guard(run_train, req)

    @app.post("/evaluate", response_model=EvalResponse)
    def evaluate_endpoint(req: EvalRequest) -> EvalResponse:
        return _guard(run_eval, req)

    @app.post("/attention", response_model=AttentionResponse)
    def attention_endpoint(req: AttentionRequest) -> AttentionResponse:
        return _guard(run_attention, req)

    @app.post("/gradcheck", response_model=GradcheckResponse)
    def gradcheck_endpoint(req: GradcheckRequest) -> GradcheckResponse:
        return _guard(run_gradcheck, req)

    return app


def _guard(fn, req):
    try:
        return fn(req)
    except (ValueError, OSError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


app = create_app()
