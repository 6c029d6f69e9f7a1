"""HTTP service over the verification core, with the request/response schemas.

The CLI calls the same handler functions in-process, so a report produced over
HTTP and one produced on the command line are byte-identical modulo timestamp.
"""

from __future__ import annotations

import math
from datetime import datetime, timezone
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, field_validator

from . import __version__
from .capacities import capacity_table
from .dynamics import integrate_flow
from .errors import DomainError, NumericalError, UsageError
from .lie_models import build_model
from .orbit_geometry import tangent_frame
from .suites import SUITES, run_suite


class CheckRecordModel(BaseModel):
    name: str
    n_samples: int
    max_residual: Optional[float]
    tolerance: float
    passed: bool


class Environment(BaseModel):
    version: str
    seed: int
    samples: int
    timestamp: Optional[str] = None


class VerificationReport(BaseModel):
    suite: str
    model: str
    records: list[CheckRecordModel]
    environment: Environment
    passed: bool

    def canonical(self) -> dict:
        """The report without its timestamp, for determinism comparisons."""
        d = self.model_dump()
        d["environment"].pop("timestamp", None)
        return d


class VerifyRequest(BaseModel):
    model: str
    suite: str = "all"
    samples: int = Field(20, gt=0)
    seed: int = 0
    tol: Optional[float] = Field(None, gt=0)
    tolerances: dict[str, float] = Field(default_factory=dict)
    fd_step: Optional[float] = Field(None, gt=0)

    @field_validator("suite")
    @classmethod
    def _known_suite(cls, v):
        if v != "all" and v not in SUITES:
            raise ValueError(f"unknown suite '{v}'")
        return v

    @field_validator("tolerances")
    @classmethod
    def _positive(cls, v):
        for k, t in v.items():
            if not t > 0:
                raise ValueError(f"tolerance for '{k}' must be positive")
        return v


class CapacityRequest(BaseModel):
    model: str
    ratio: Optional[float] = Field(None, gt=0)
    twist: Optional[float] = Field(None, gt=1)
    rho: Optional[float] = Field(None, gt=0, lt=2)


class CapacityRow(BaseModel):
    quantity: str
    value: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    parts: Optional[dict[str, float]] = None


class CapacityTable(BaseModel):
    model: str
    rows: list[CapacityRow]


class FlowRequest(BaseModel):
    model: str
    speed: float = Field(1.0, ge=0)
    twist: float = 0.0
    dt: float = Field(1e-3, gt=0)
    steps: int = Field(1000, ge=0)
    sample_every: int = Field(1, ge=1)


class FlowSummary(BaseModel):
    model: str
    steps: int
    t_end: float
    energy_start: float
    energy_end: float
    max_energy_drift: float
    max_orbit_drift: float


def run_verify(req: VerifyRequest, timestamp: str | None = None) -> VerificationReport:
    recs = run_suite(req.model, req.suite, req.samples, req.seed, req.tol, req.tolerances, req.fd_step)
    rows = [CheckRecordModel(name=r.name, n_samples=r.n_samples,
                             max_residual=r.max_residual if math.isfinite(r.max_residual) else None,
                             tolerance=r.tolerance, passed=r.passed) for r in recs]
    env = Environment(version=__version__, seed=req.seed, samples=req.samples,
                      timestamp=timestamp or datetime.now(timezone.utc).isoformat())
    return VerificationReport(suite=req.suite, model=req.model, records=rows, environment=env,
                              passed=all(r.passed for r in rows))


def merge_reports(reports: list[VerificationReport]) -> VerificationReport:
    if not reports:
        raise UsageError("nothing to merge")
    rows = [r for rep in reports for r in rep.records]
    models = sorted({rep.model for rep in reports})
    suites = sorted({rep.suite for rep in reports})
    seeds = {rep.environment.seed for rep in reports}
    env = Environment(version=__version__, seed=seeds.pop() if len(seeds) == 1 else -1,
                      samples=max(rep.environment.samples for rep in reports),
                      timestamp=max((rep.environment.timestamp or "") for rep in reports) or None)
    return VerificationReport(suite="+".join(suites), model="+".join(models), records=rows, environment=env,
                              passed=all(r.passed for r in rows))


def run_capacities(req: CapacityRequest) -> CapacityTable:
    rows = []
    for name, val in capacity_table(req.model, R=req.ratio, s=req.twist, rho=req.rho):
        if isinstance(val, tuple):
            rows.append(CapacityRow(quantity=name, lower=val[0], upper=val[1]))
        elif isinstance(val, dict):
            rows.append(CapacityRow(quantity=name, parts=val))
        else:
            rows.append(CapacityRow(quantity=name, value=val))
    return CapacityTable(model=req.model, rows=rows)


def run_flow(req: FlowRequest):
    """Trajectory from the base point with initial velocity speed * (first frame vector)."""
    model = build_model(req.model)
    x0 = model.base_point
    v0 = req.speed * tangent_frame(model, x0)[0]
    rec = integrate_flow(model, x0, v0, req.twist, req.dt, req.steps, req.sample_every)
    summary = FlowSummary(model=req.model, steps=req.steps, t_end=float(rec.times[-1]),
                          energy_start=float(rec.energy[0]), energy_end=float(rec.energy[-1]),
                          max_energy_drift=rec.max_energy_drift, max_orbit_drift=float(np.max(rec.drift)))
    return summary, rec


def create_app() -> FastAPI:
    app = FastAPI(title="hss-lab", version=__version__)

    def guarded(fn, *args):
        try:
            return fn(*args)
        except (UsageError, DomainError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except NumericalError as exc:
            raise HTTPException(status_code=500, detail=str(exc))

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/verify", response_model=VerificationReport)
    def verify(req: VerifyRequest):
        return guarded(run_verify, req)

    @app.post("/capacities", response_model=CapacityTable)
    def capacities(req: CapacityRequest):
        return guarded(run_capacities, req)

    @app.post("/flow", response_model=FlowSummary)
    def flow(req: FlowRequest):
        return guarded(run_flow, req)[0]

    @app.post("/report", response_model=VerificationReport)
    def report(reports: list[VerificationReport]):
        return guarded(merge_reports, reports)

    return app


app = create_app()
