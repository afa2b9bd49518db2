"""FastAPI application wrapping the solver pipeline."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import handlers, schemas

app = FastAPI(
    title="hessian2",
    description="Local solutions of the elliptic 2-Hessian equation in R^3",
)


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok")


@app.post("/tau", response_model=schemas.TauRecord)
def tau(req: schemas.TauRequest) -> schemas.TauRecord:
    try:
        return handlers.handle_tau(req)
    except handlers.RequestError as err:
        raise HTTPException(status_code=400, detail=str(err)) from err


@app.post("/solve", response_model=schemas.SolveResponse)
def solve(req: schemas.SolveRequest) -> schemas.SolveResponse:
    try:
        return handlers.handle_solve(req)
    except handlers.RequestError as err:
        raise HTTPException(status_code=400, detail=str(err)) from err


@app.post("/sweep", response_model=schemas.SweepResponse)
def sweep(req: schemas.SweepRequest) -> schemas.SweepResponse:
    try:
        return handlers.handle_sweep(req)
    except handlers.RequestError as err:
        raise HTTPException(status_code=400, detail=str(err)) from err


@app.post("/verify", response_model=schemas.VerifyResponse)
def verify(req: schemas.VerifyRequest) -> schemas.VerifyResponse:
    try:
        return handlers.handle_verify(req)
    except handlers.RequestError as err:
        raise HTTPException(status_code=400, detail=str(err)) from err
