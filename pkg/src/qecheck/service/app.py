"""HTTP service exposing the verification and obstruction pipelines.

Run with: uvicorn qecheck.service.app:app
"""

from __future__ import annotations

import datetime

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import QecheckError
from ..pipelines import run_check, run_harnack, run_potential, run_verify
from .models import (
    CheckRequest,
    Health,
    HarnackRequest,
    PotentialRequest,
    Report,
    VerifyRequest,
)

app = FastAPI(
    title="qecheck",
    description="curvature identity verification and quasi-Einstein / "
    "soliton / static obstruction tests on chart descriptions",
    version=__version__,
)


def _tol(req):
    return req.tolerances.as_dict() if req.tolerances else None


def _stamp():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _guard(fn):
    try:
        return fn()
    except QecheckError as err:
        raise HTTPException(status_code=400, detail=str(err))


@app.get("/healthz", response_model=Health)
def healthz():
    return Health(status="ok", version=__version__)


@app.post("/verify", response_model=Report)
def verify(req: VerifyRequest):
    return _guard(lambda: run_verify(req.manifold, _tol(req), _stamp()))


@app.post("/check", response_model=Report)
def check(req: CheckRequest):
    return _guard(lambda: run_check(req.manifold, req.mode, _tol(req), _stamp()))


@app.post("/potential", response_model=Report)
def potential(req: PotentialRequest):
    return _guard(
        lambda: run_potential(
            req.manifold, req.path, nsub=req.subdivisions,
            tol_overrides=_tol(req), generated_at=_stamp(),
        )
    )


@app.post("/harnack", response_model=Report)
def harnack(req: HarnackRequest):
    return _guard(
        lambda: run_harnack(
            req.manifold, req.m_values, trials=req.trials,
            tol_overrides=_tol(req), generated_at=_stamp(),
        )
    )
