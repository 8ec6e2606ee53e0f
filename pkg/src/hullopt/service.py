"""HTTP service exposing the pipeline stages on run directories.

Each stage endpoint opens the run directory under an exclusive file lock,
executes one stage operation and returns its summary. Domain and
configuration failures map to 400, a busy run directory to 409 and anything
else to 500.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import yaml
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from filelock import FileLock, Timeout
from pydantic import BaseModel, Field

from . import __version__
from .errors import HullOptError
from .pipeline import (
    PipelineConfig,
    check_manifest,
    init_run,
    load_config,
    op_bo,
    op_crossval,
    op_fit,
    op_moo,
    op_pds,
    op_reparam,
    op_sample,
    op_solve,
    open_run,
    run,
    write_report,
)


class RunBusy(Exception):
    """Another process holds the run directory lock."""


# -- schemas ----------------------------------------------------------------------


class Overrides(BaseModel):
    seed: Optional[int] = None
    time_limit: Optional[float] = Field(default=None, gt=0)
    max_iters: Optional[int] = Field(default=None, ge=0)
    params_target: Optional[int] = Field(default=None, ge=1)


class RunRequest(Overrides):
    run_dir: str


class InitRequest(BaseModel):
    run_dir: str
    config_path: Optional[str] = None
    overwrite: bool = False


class SampleRequest(RunRequest):
    count: Optional[int] = Field(default=None, ge=1)


class SolveRequest(RunRequest):
    configs: Optional[list[list[float]]] = None
    provenance: Literal["manual", "initial-sample", "reparam-sample"] = "manual"


class FullRunRequest(RunRequest):
    config_path: Optional[str] = None
    max_steps: Optional[int] = Field(default=None, ge=1)


class CrossvalRequest(RunRequest):
    folds: int = Field(default=5, ge=2)
    ranks: Optional[list[int]] = None


class StageResponse(BaseModel):
    command: str
    run_dir: str
    result: dict[str, Any]


class ErrorResponse(BaseModel):
    error: str
    detail: str


class Health(BaseModel):
    status: str
    version: str


# -- helpers ------------------------------------------------------------------------


def jsonable(obj):
    """Plain JSON types for numpy values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


@contextmanager
def locked(run_dir):
    path = Path(run_dir)
    path.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(path / ".lock"))
    try:
        lock.acquire(timeout=0)
    except Timeout as exc:
        raise RunBusy(f"run directory {run_dir} is in use by another process") from exc
    try:
        yield
    finally:
        lock.release()


def _overrides(req: Overrides) -> dict:
    return {k: getattr(req, k) for k in ("seed", "time_limit", "max_iters", "params_target")
            if getattr(req, k) is not None}


def _stage(command: str, req: RunRequest, fn) -> StageResponse:
    with locked(req.run_dir):
        state = open_run(req.run_dir, _overrides(req))
        result = fn(state)
    return StageResponse(command=command, run_dir=req.run_dir, result=jsonable(result))


# -- application ---------------------------------------------------------------------


app = FastAPI(title="hullopt", version=__version__,
              description="Surrogate-based hull structural optimization")


@app.exception_handler(HullOptError)
async def domain_error(request: Request, exc: HullOptError):
    return JSONResponse(status_code=400, content={"error": type(exc).__name__, "detail": str(exc)})


@app.exception_handler(RunBusy)
async def busy_error(request: Request, exc: RunBusy):
    return JSONResponse(status_code=409, content={"error": "RunBusy", "detail": str(exc)})


@app.exception_handler(Exception)
async def internal_error(request: Request, exc: Exception):
    return JSONResponse(status_code=500, content={"error": type(exc).__name__, "detail": str(exc)})


@app.get("/health", response_model=Health)
def health():
    return Health(status="ok", version=__version__)


@app.post("/runs/init", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def init(req: InitRequest):
    with locked(req.run_dir):
        state = init_run(req.run_dir, load_config(req.config_path), overwrite=req.overwrite)
        result = {"n_params": state.space.n_params, "config": str(Path(req.run_dir) / "config.yaml")}
    return StageResponse(command="init", run_dir=req.run_dir, result=result)


@app.post("/runs/sample", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def sample(req: SampleRequest):
    return _stage("sample", req, lambda s: op_sample(s, req.count))


@app.post("/runs/solve", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def solve(req: SolveRequest):
    return _stage("solve", req, lambda s: op_solve(s, req.configs, req.provenance))


@app.post("/runs/fit", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def fit(req: RunRequest):
    return _stage("fit", req, op_fit)


@app.post("/runs/moo", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def moo(req: RunRequest):
    return _stage("moo", req, op_moo)


@app.post("/runs/bo", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def bo(req: RunRequest):
    return _stage("bo", req, op_bo)


@app.post("/runs/pds", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def pds(req: RunRequest):
    return _stage("pds", req, op_pds)


@app.post("/runs/reparam", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def reparam(req: RunRequest):
    return _stage("reparam", req, lambda s: op_reparam(s, req.params_target))


@app.post("/runs/report", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def report(req: RunRequest):
    return _stage("report", req, write_report)


@app.post("/runs/crossval", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def crossval(req: CrossvalRequest):
    return _stage("crossval", req, lambda s: op_crossval(s, req.folds, req.ranks))


@app.post("/runs/run", response_model=StageResponse, responses={400: {"model": ErrorResponse}})
def full_run(req: FullRunRequest):
    with locked(req.run_dir):
        root = Path(req.run_dir)
        if (root / "manifest.json").exists():
            check_manifest(root)
            config = PipelineConfig.from_yaml(root / "config.yaml")
        else:
            config = load_config(req.config_path)
            init_run(root, config)
        over = _overrides(req)
        if over:
            # persist the overrides so that a resumed run keeps them
            config = config.with_overrides(**over)
            (root / "config.yaml").write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))
        result = run(root, resume=True, max_steps=req.max_steps)
    return StageResponse(command="run", run_dir=req.run_dir, result=jsonable(result))


def main(argv=None) -> None:
    """Serve the application with uvicorn (``pip install hullopt[serve]``)."""
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="hullopt-serve", description="Run the hullopt HTTP service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args(argv)
    uvicorn.run(app, host=args.host, port=args.port)


__all__ = ["app", "jsonable", "locked", "main"]
