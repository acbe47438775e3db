"""HTTP service exposing the experiment runner.

The CLI talks to this app (in-process by default, over the network with
--server); request and response bodies are the same ExperimentConfig /
RunRecord schemas that the JSON files use.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__
from .experiments import ExperimentConfig, RunRecord, run, sweep

app = FastAPI(title="zakharov", version=__version__)


class HealthResponse(BaseModel):
    status: str
    version: str


class SweepResponse(BaseModel):
    records: list[RunRecord]
    csv: str


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/run", response_model=RunRecord)
def run_endpoint(config: ExperimentConfig) -> RunRecord:
    if config.task == "sweep":
        raise HTTPException(status_code=400, detail="use /sweep for sweep tasks")
    try:
        return run(config)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except RuntimeError as exc:
        raise HTTPException(status_code=500, detail=f"solver failure: {exc}") from exc


@app.post("/sweep", response_model=SweepResponse)
def sweep_endpoint(config: ExperimentConfig) -> SweepResponse:
    if config.task != "sweep":
        raise HTTPException(status_code=400, detail="config.task must be 'sweep'")
    try:
        records, csv = sweep(config)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except RuntimeError as exc:
        raise HTTPException(status_code=500, detail=f"solver failure: {exc}") from exc
    return SweepResponse(records=records, csv=csv)
