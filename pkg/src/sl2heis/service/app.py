"""FastAPI service exposing the toolkit.

Convention: a request that parses but describes invalid inputs gets a 400;
a computation that runs but misses its requested tolerance is not an HTTP
error, the response carries ok=false and the caller decides.
"""

from __future__ import annotations

import json

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..checks import check_algebra
from ..group import GroupElement, iwasawa, recompose
from ..liouville import (
    GaussianDensity,
    LiouvilleTargetParams,
    PhaseGrid,
    SupportEscapeError,
)
from ..liouville import reach_experiment as liouville_reach
from ..quantum import AliasingError, QuantumTargetParams, WaveGrid
from ..quantum import reach_experiment as quantum_reach
from ..schedule import ControlSchedule
from ..simulate import fit_loglog_slope, simulate, sweep
from ..synth import named_sweep_targets, plan_target
from .models import (
    AlgebraCheckRequest,
    IwasawaRequest,
    LiouvilleReachRequest,
    QuantumReachRequest,
    SimulateRequest,
    SweepRequest,
    SynthRequest,
)


def _to_schedule(model) -> ControlSchedule:
    # omitted per-axis controls arrive as explicit nulls; the file format
    # treats a missing key as zeros
    return ControlSchedule.from_json(json.dumps(model.model_dump(exclude_none=True)))


def _to_group_element(model) -> GroupElement:
    return GroupElement.from_json(json.dumps(model.model_dump()))


def create_app() -> FastAPI:
    app = FastAPI(title="sl2heis", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def _on_validation(request: Request, exc: RequestValidationError):
        # errors() entries can carry live exception objects under ctx;
        # keep only the serializable fields
        detail = [
            {
                "loc": [str(part) for part in err.get("loc", ())],
                "msg": str(err.get("msg", "")),
                "type": str(err.get("type", "")),
            }
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    @app.exception_handler(ValueError)
    async def _on_value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/healthz")
    async def healthz():
        return {"ok": True, "version": __version__}

    @app.post("/check-algebra")
    async def check_algebra_route(req: AlgebraCheckRequest):
        return check_algebra(d=req.d, seed=req.seed, samples=req.samples, tol=req.tol)

    @app.post("/iwasawa")
    async def iwasawa_route(req: IwasawaRequest):
        s = np.array(req.matrix, dtype=float).reshape(2, 2)
        t1, t2, t3 = iwasawa(s)
        residual = float(np.max(np.abs(recompose(t1, t2, t3) - s)))
        return {"ok": residual <= 1e-9, "t1": t1, "t2": t2, "t3": t3, "residual": residual}

    @app.post("/synth")
    async def synth_route(req: SynthRequest):
        target = _to_group_element(req.target)
        report = plan_target(target, req.tol, eps0=req.eps0, max_iter=req.max_iter)
        return report.to_dict()

    @app.post("/simulate")
    async def simulate_route(req: SimulateRequest):
        schedule = _to_schedule(req.schedule)
        g = simulate(schedule)
        return {
            "ok": True,
            "group": json.loads(g.to_json()),
            "total_time": schedule.total_time(),
            "max_amplitude": schedule.max_amplitude(),
        }

    @app.post("/sweep")
    async def sweep_route(req: SweepRequest):
        targets = named_sweep_targets()
        if req.target not in targets:
            raise ValueError(
                f"unknown sweep target {req.target!r}; pick one of {sorted(targets)}"
            )
        goal, recipe = targets[req.target]
        rows = sweep(goal, recipe, req.eps, jobs=req.jobs)
        errors = [row.error for row in rows]
        decreasing = all(b < a for a, b in zip(errors, errors[1:]))
        return {
            "ok": bool(decreasing),
            "target": req.target,
            "slope": fit_loglog_slope(rows),
            "rows": [
                {
                    "epsilon": row.epsilon,
                    "error": row.error,
                    "total_time": row.total_time,
                    "max_amplitude": row.max_amplitude,
                }
                for row in rows
            ],
        }

    @app.post("/quantum-reach")
    async def quantum_reach_route(req: QuantumReachRequest):
        if len(req.p) != req.d or len(req.beta) != req.d:
            raise ValueError("p and beta must have length d")
        params = QuantumTargetParams(
            s=req.s, alpha=req.alpha, p=req.p, sigma=req.sigma, beta=req.beta
        )
        psi0 = WaveGrid.gaussian(d=req.d, N=req.grid_n, L=req.grid_l)
        try:
            return quantum_reach(
                psi0,
                params,
                req.tol,
                dt_max=req.dt_max,
                eta=req.eta,
                eps0=req.eps0,
            )
        except AliasingError as exc:
            return {"ok": False, "reason": f"aliasing guard: {exc}", "tol": req.tol}

    @app.post("/liouville-reach")
    async def liouville_reach_route(req: LiouvilleReachRequest):
        if len(req.s) != req.d or len(req.w) != req.d:
            raise ValueError("s and w must have length d")
        params = LiouvilleTargetParams(alpha=req.alpha, t=req.t, r=req.r, s=req.s, w=req.w)
        grid = PhaseGrid.default(d=req.d, half_width=req.grid_l, N=req.grid_n)
        rho0 = GaussianDensity(d=req.d)
        try:
            return liouville_reach(
                rho0,
                params,
                req.tol,
                grid=grid,
                p_norms=tuple(req.p_norms),
                eps0=req.eps0,
            )
        except SupportEscapeError as exc:
            return {"ok": False, "reason": f"support escape: {exc}", "tol": req.tol}

    return app


app = create_app()
