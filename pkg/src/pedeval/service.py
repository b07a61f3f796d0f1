"""HTTP service exposing the evaluator.

The server holds the dataset side (annotation, detection and mask files on
its filesystem); clients submit a run configuration and get back the
rendered artifacts plus a summary.  Loaded datasets are cached by path and
modification time, so evaluating many detector checkpoints against the
same ground truth only decodes the masks once.
"""

from __future__ import annotations

import os
import threading
from collections import OrderedDict

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import RunConfig
from .errors import PedevalError
from .runner import (Diagnostic, LoadedDataset, load_dataset,
                     run_categorization, run_evaluation, run_validation)


class EvaluateRequest(BaseModel):
    config: RunConfig


class EvaluateResponse(BaseModel):
    ok: bool = True
    summary: dict
    artifacts: dict[str, str]
    warnings: list[str] = Field(default_factory=list)


class CategorizeResponse(BaseModel):
    ok: bool = True
    cardinalities: dict[str, int]
    residual_candidates: int
    artifacts: dict[str, str]
    warnings: list[str] = Field(default_factory=list)


class DiagnosticModel(BaseModel):
    level: str
    message: str


class ValidateResponse(BaseModel):
    ok: bool
    diagnostics: list[DiagnosticModel]


# ---------------------------------------------------------------------------
# Dataset cache

_CACHE_SIZE = 4
_cache: OrderedDict[tuple, LoadedDataset] = OrderedDict()
_cache_lock = threading.Lock()


def _signature(path: str) -> tuple:
    st = os.stat(path)
    return (path, st.st_mtime_ns, st.st_size)


def _dataset_key(cfg: RunConfig) -> tuple | None:
    try:
        parts = [_signature(cfg.ground_truth), _signature(cfg.detections)]
        for name in sorted(os.listdir(cfg.mask_dir)):
            parts.append(_signature(os.path.join(cfg.mask_dir, name)))
        parts.append(("ped", cfg.labels.pedestrian_id(),
                      cfg.labels.instance_id_encoding))
        return tuple(parts)
    except (OSError, PedevalError):
        return None  # let load_dataset produce the proper error


def cached_load_dataset(cfg: RunConfig) -> LoadedDataset:
    key = _dataset_key(cfg)
    if key is None:
        return load_dataset(cfg)
    with _cache_lock:
        if key in _cache:
            _cache.move_to_end(key)
            return _cache[key]
    dataset = load_dataset(cfg)
    with _cache_lock:
        _cache[key] = dataset
        while len(_cache) > _CACHE_SIZE:
            _cache.popitem(last=False)
    return dataset


def clear_dataset_cache() -> None:
    with _cache_lock:
        _cache.clear()


# ---------------------------------------------------------------------------
# Handlers (used by the HTTP routes and, in-process, by the CLI)

def handle_evaluate(req: EvaluateRequest) -> EvaluateResponse:
    out = run_evaluation(req.config, loader=cached_load_dataset)
    return EvaluateResponse(summary=out.summary, artifacts=out.artifacts,
                            warnings=out.warnings)


def handle_categorize(req: EvaluateRequest) -> CategorizeResponse:
    out = run_categorization(req.config, loader=cached_load_dataset)
    return CategorizeResponse(
        cardinalities=out.summary["cardinalities"],
        residual_candidates=out.summary["residual_candidates"],
        artifacts=out.artifacts, warnings=out.warnings)


def handle_validate(req: EvaluateRequest) -> ValidateResponse:
    diagnostics: list[Diagnostic] = run_validation(req.config)
    ok = not any(d.level == "error" for d in diagnostics)
    return ValidateResponse(ok=ok, diagnostics=[
        DiagnosticModel(level=d.level, message=d.message)
        for d in diagnostics])


# ---------------------------------------------------------------------------
# FastAPI application

app = FastAPI(title="pedeval", version=__version__)


def _http_error(e: PedevalError) -> HTTPException:
    return HTTPException(status_code=400,
                         detail={"kind": e.kind, "message": str(e)})


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate(req: EvaluateRequest):
    try:
        return handle_evaluate(req)
    except PedevalError as e:
        raise _http_error(e)


@app.post("/categorize", response_model=CategorizeResponse)
def categorize(req: EvaluateRequest):
    try:
        return handle_categorize(req)
    except PedevalError as e:
        raise _http_error(e)


@app.post("/validate", response_model=ValidateResponse)
def validate(req: EvaluateRequest):
    try:
        return handle_validate(req)
    except PedevalError as e:
        raise _http_error(e)
