"""FastAPI application exposing the run pipeline over HTTP."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import BagsideError
from ..pipeline import (
    RunConfig,
    load_config_file,
    resolve_config,
    run_eval,
    run_prcurve,
    run_predict,
    run_train,
    run_tune,
    run_validate,
)
from . import schemas


def _config_from(body: schemas.RunConfigBody) -> RunConfig:
    file_values = load_config_file(body.config_file) if body.config_file else None
    overrides = body.model_dump(exclude=set(schemas.EXTRA_FIELDS), exclude_none=True)
    return resolve_config(file_values, overrides)


def create_app() -> FastAPI:
    app = FastAPI(title="bagside", version=__version__)

    @app.exception_handler(BagsideError)
    async def _domain_error(_request: Request, exc: BagsideError) -> JSONResponse:
        body = schemas.ErrorResponse(error=schemas.ErrorInfo(
            kind=type(exc).__name__,
            category=exc.category,
            message=str(exc),
        ))
        return JSONResponse(status_code=400, content=body.model_dump())

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/validate", response_model=schemas.ValidateResponse)
    def validate(body: schemas.ValidateRequest) -> dict:
        return run_validate(_config_from(body))

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(body: schemas.TrainRequest) -> dict:
        return run_train(_config_from(body))

    @app.post("/tune", response_model=schemas.TuneResponse)
    def tune(body: schemas.TuneRequest) -> dict:
        return run_tune(_config_from(body), body.trials)

    @app.post("/eval", response_model=schemas.EvalResponse)
    def eval_(body: schemas.EvalRequest) -> dict:
        return run_eval(_config_from(body), body.checkpoint,
                        modes=tuple(body.modes), ns=tuple(body.ns))

    @app.post("/pr-curve", response_model=schemas.PrCurveResponse)
    def prcurve(body: schemas.PrCurveRequest) -> dict:
        return run_prcurve(_config_from(body), body.checkpoint)

    @app.post("/predict", response_model=schemas.PredictResponse)
    def predict(body: schemas.PredictRequest) -> dict:
        return run_predict(_config_from(body), body.checkpoint)

    return app
