"""roamsim: deterministic discrete-event simulation of a roaming wireless hotspot.

A router acts as the single DHCP server, access points in forwarder mode
relay client broadcasts to it, and mobile stations pick the strongest AP of
a shared network name as they move, keeping the same address across
handoffs.
"""

__version__ = "0.1.0"

from .engine import Engine, SchedulingError, SimStats
from .radio import CoverageRegime, Position, RadioModel, effective_capacity, per, regime, rssi_at
from .scenario import ScenarioConfig, ScenarioError, parse_scenario, render_scenario
from .simulation import SimResult, Simulation, run_scenario

__all__ = [
    "Engine",
    "SchedulingError",
    "SimStats",
    "CoverageRegime",
    "Position",
    "RadioModel",
    "effective_capacity",
    "per",
    "regime",
    "rssi_at",
    "ScenarioConfig",
    "ScenarioError",
    "parse_scenario",
    "render_scenario",
    "SimResult",
    "Simulation",
    "run_scenario",
]
