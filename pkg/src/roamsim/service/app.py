"""HTTP front end over the simulator.

Each request parses its own scenario and runs an isolated simulation
instance, so the service is stateless and safe under concurrent clients.
The CLI drives the same ``run_request`` path in-process.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..scenario import ScenarioError, parse_scenario
from ..simulation import SimResult, run_scenario
from .models import (
    HandoffModel,
    RegimeColumn,
    ScenarioProblem,
    SimulateRequest,
    SimulateResponse,
    StationState,
    ValidateRequest,
    ValidateResponse,
)


def _columns(result: SimResult) -> list[RegimeColumn]:
    cols = []
    for c in result.summary.columns:
        cols.append(RegimeColumn(
            name=c.name,
            start_s=c.t_start,
            end_s=c.t_end,
            samples=c.n_samples,
            bandwidth_kbps=c.bandwidth_kbps,
            bandwidth_min_kbps=c.bandwidth_range[0] if c.bandwidth_range else None,
            bandwidth_max_kbps=c.bandwidth_range[1] if c.bandwidth_range else None,
            throughput_kBps=c.throughput_kBps,
            ping_ms=c.ping_ms,
            rto_count=c.rto_count,
            disconnected=c.disconnected,
        ))
    return cols


def run_request(request: SimulateRequest) -> SimulateResponse:
    """Parse, simulate, and package one request (raises ScenarioError)."""
    config = parse_scenario(request.scenario)
    result = run_scenario(config, request.seed)
    handoff = None
    if result.handoff is not None:
        handoff = HandoffModel(
            outage_start_s=result.handoff.outage_start_s,
            outage_end_s=result.handoff.outage_end_s,
            rto_count=result.handoff.rto_count,
            throughput_recovery_s=result.handoff.throughput_recovery_s,
        )
    return SimulateResponse(
        seed=result.seed,
        duration_s=result.duration_s,
        events_processed=result.events_processed,
        columns=_columns(result),
        handoff=handoff,
        stations=[
            StationState(mac=s.mac, bssid=s.bssid, ip=s.ip, ips_held=s.ips_held)
            for s in result.stations
        ],
        summary_text=result.summary_text,
        csv=result.csv if request.include_csv else None,
        frames=result.frames if request.include_frames else None,
        leases=result.leases if request.include_leases else None,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="roamsim", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(request: SimulateRequest) -> SimulateResponse:
        try:
            return run_request(request)
        except ScenarioError as exc:
            problem = ScenarioProblem(line=exc.line, message=exc.message)
            raise HTTPException(status_code=400, detail=problem.model_dump()) from exc

    @app.post("/validate", response_model=ValidateResponse)
    def validate(request: ValidateRequest) -> ValidateResponse:
        try:
            parse_scenario(request.scenario)
        except ScenarioError as exc:
            return ValidateResponse(valid=False, line=exc.line, message=exc.message)
        return ValidateResponse(valid=True)

    return app
