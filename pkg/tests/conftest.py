import random
from pathlib import Path

import pytest

from roamsim.ip import RouterConfig
from roamsim.radio import Position, RadioModel
from roamsim.scenario import (
    AppSpec,
    ScenarioConfig,
    StationSpec,
    Waypoint,
    parse_scenario,
)
from roamsim.simulation import run_scenario
from roamsim.wifi import ApConfig, DhcpMode, StationSettings

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture(scope="session")
def roaming_text() -> str:
    return (SCENARIO_DIR / "roaming.ini").read_text()


@pytest.fixture(scope="session")
def no_roaming_text() -> str:
    return (SCENARIO_DIR / "no_roaming.ini").read_text()


@pytest.fixture(scope="session")
def roaming_result(roaming_text):
    return run_scenario(parse_scenario(roaming_text), 42)


@pytest.fixture(scope="session")
def no_roaming_result(no_roaming_text):
    return run_scenario(parse_scenario(no_roaming_text), 42)


@pytest.fixture(scope="session")
def roaming_batch(roaming_text):
    """Results for seeds 1..10, shared by the statistics-based checks."""
    return {
        seed: run_scenario(parse_scenario(roaming_text), seed) for seed in range(1, 11)
    }


def mac_of(n: int) -> str:
    return f"02:00:00:00:{(n >> 8) & 0xFF:02x}:{n & 0xFF:02x}"


def random_config(rnd: random.Random, max_aps: int = 3, max_stations: int = 2) -> ScenarioConfig:
    """A randomized but always-valid scenario for property tests."""
    radio = RadioModel()
    router = RouterConfig(
        lease_time_s=round(rnd.uniform(60.0, 7200.0), 3),
        wan_kbps=round(rnd.uniform(100.0, 2000.0), 3),
        wan_rtt_ms=round(rnd.uniform(20.0, 400.0), 3),
    )
    n_aps = rnd.randint(1, max_aps)
    aps = []
    for i in range(n_aps):
        aps.append((
            f"ap{i}",
            ApConfig(
                bssid=mac_of(0x100 + i),
                ssid=rnd.choice(["Roaming", "Office"]),
                key=rnd.choice(["qwerty123", "hunter2"]),
                position=Position(
                    round(rnd.uniform(-50.0, 300.0), 3), round(rnd.uniform(-50.0, 300.0), 3)
                ),
                beacon_interval_ms=rnd.choice([100.0, 200.0]),
                dhcp_mode=rnd.choice([DhcpMode.FORWARDER, DhcpMode.FORWARDER, DhcpMode.OFF]),
            ),
        ))
    stations = []
    for i in range(rnd.randint(1, max_stations)):
        n_wp = rnd.randint(1, 4)
        times = sorted(rnd.sample(range(0, 600), n_wp))
        waypoints = [
            Waypoint(float(t), Position(
                round(rnd.uniform(-50.0, 300.0), 3), round(rnd.uniform(-50.0, 300.0), 3)
            ))
            for t in times
        ]
        apps = []
        if rnd.random() < 0.5:
            apps.append(AppSpec("ping", {"interval": 1.0, "timeout": 1.0}))
        if rnd.random() < 0.3:
            apps.append(AppSpec("download", {"server_resume_delay_s": round(rnd.uniform(1, 60), 3)}))
        stations.append(StationSpec(
            name=f"st{i}",
            mac=mac_of(0xAA00 + i),
            settings=StationSettings(
                ssid=rnd.choice(["Roaming", "Office", ""]),
                key=rnd.choice(["qwerty123", "hunter2"]),
                roam_scan_dbm=round(rnd.uniform(-78.0, -70.0), 3),
                hysteresis_db=round(rnd.uniform(0.0, 8.0), 3),
                scan_interval_s=round(rnd.uniform(1.0, 4.0), 3),
            ),
            waypoints=waypoints,
            apps=apps,
        ))
    return ScenarioConfig(
        router=router,
        radio=radio,
        aps=aps,
        stations=stations,
        duration_s=float(rnd.randint(20, 60)),
        seed=rnd.randint(0, 2**31),
    )
