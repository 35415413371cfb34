"""Request/response schemas for the simulation service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class SimulateRequest(BaseModel):
    scenario: str = Field(description="Scenario file contents (INI dialect)")
    seed: Optional[int] = Field(default=None, description="Overrides the [sim] seed")
    include_csv: bool = False
    include_frames: bool = False
    include_leases: bool = False


class RegimeColumn(BaseModel):
    name: str
    start_s: float
    end_s: float
    samples: int
    bandwidth_kbps: Optional[float] = None
    bandwidth_min_kbps: Optional[float] = None
    bandwidth_max_kbps: Optional[float] = None
    throughput_kBps: Optional[float] = None
    ping_ms: Optional[float] = None
    rto_count: int = 0
    disconnected: bool = False


class HandoffModel(BaseModel):
    outage_start_s: float
    outage_end_s: float
    rto_count: int
    throughput_recovery_s: Optional[float] = None


class StationState(BaseModel):
    mac: str
    bssid: Optional[str] = None
    ip: Optional[str] = None
    ips_held: list[str] = []


class SimulateResponse(BaseModel):
    seed: int
    duration_s: float
    events_processed: int
    columns: list[RegimeColumn]
    handoff: Optional[HandoffModel] = None
    stations: list[StationState]
    summary_text: str
    csv: Optional[str] = None
    frames: Optional[str] = None
    leases: Optional[str] = None


class ValidateRequest(BaseModel):
    scenario: str


class ValidateResponse(BaseModel):
    valid: bool
    line: Optional[int] = None
    message: Optional[str] = None


class ScenarioProblem(BaseModel):
    line: Optional[int] = None
    message: str
