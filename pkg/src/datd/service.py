"""HTTP interface over the simulator.

The service exposes the same operations as the command-line client: run a
scenario under one or both weighting schemes, sweep one parameter across a
value grid, and print the worked-example verification. All request and
response bodies are the pydantic models from :mod:`datd.schemas`, so the
OpenAPI schema published at ``/docs`` is the full wire contract.

Domain errors (anything raised as :class:`~datd.errors.DatdError`) and
invalid scenario values that pass shape validation but fail the scenario's
own consistency checks are reported as HTTP 400 with a stable ``error``
code; malformed request bodies are rejected by FastAPI as 422 before they
reach a handler.
"""

from __future__ import annotations

import dataclasses

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__, golden, harness
from .errors import DatdError
from .harness import PairedResult
from .schemas import (
    CredibilityRow,
    ErrorBody,
    GoldenCheckModel,
    HealthResponse,
    RunRequest,
    RunResponse,
    ScenarioModel,
    SchemeSummary,
    SweepRequest,
    SweepResponse,
    SweepRow,
    Table2Response,
    TaskRow,
    WeightRow,
)


def _summaries(result: PairedResult) -> list[SchemeSummary]:
    out: list[SchemeSummary] = []
    for scheme in result.runs:
        high_rmse, high_loss = harness.high_value_metrics(result.metrics, scheme)
        out.append(
            SchemeSummary(
                scheme=scheme,
                total_deviation=harness.total_deviation(result.metrics, scheme),
                rmse=harness.run_rmse(result.metrics, scheme),
                total_loss=harness.total_loss(result.metrics, scheme),
                high_value_rmse=high_rmse,
                high_value_loss=high_loss,
            )
        )
    return out


def create_app() -> FastAPI:
    """Build the application; importing :data:`app` gives a ready instance."""
    app = FastAPI(
        title="datd",
        version=__version__,
        description="Value-aware truth discovery simulator for price feeds.",
    )

    @app.exception_handler(DatdError)
    async def _domain_error(request: Request, exc: DatdError) -> JSONResponse:
        body = ErrorBody(error=exc.code, detail=str(exc))
        return JSONResponse(status_code=400, content=body.model_dump())

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError) -> JSONResponse:
        body = ErrorBody(error="invalid-config", detail=str(exc))
        return JSONResponse(status_code=400, content=body.model_dump())

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/run", response_model=RunResponse)
    def run(request: RunRequest) -> RunResponse:
        config = request.config.to_config()
        if request.scheme == "both":
            result = harness.run_paired(config)
        else:
            result = harness.run_single(config, request.scheme)
        return RunResponse(
            config=ScenarioModel.from_config(config),
            scheme=request.scheme,
            summaries=_summaries(result),
            per_task=[TaskRow(**row) for row in harness.per_task_rows(result)],
            credibility=[
                CredibilityRow(**row) for row in harness.credibility_rows(result)
            ],
            weights=[WeightRow(**row) for row in harness.weights_rows(result)],
        )

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(request: SweepRequest) -> SweepResponse:
        config = request.config.to_config()
        rows = harness.sweep(config, request.param, list(request.values), request.seeds)
        return SweepResponse(rows=[SweepRow(**row) for row in rows])

    @app.get("/table2", response_model=Table2Response)
    def table2() -> Table2Response:
        results = golden.checks()
        return Table2Response(
            checks=[GoldenCheckModel(**dataclasses.asdict(c)) for c in results],
            all_passed=golden.all_passed(results),
        )

    return app


app = create_app()
