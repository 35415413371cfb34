"""Scenario files: a flat INI dialect with line-numbered diagnostics.

Sections are ``[router]``, ``[radio]``, ``[ap <name>]``, ``[station <name>]``
and ``[sim]``. Keys match the configuration dataclasses field for field;
unknown keys are rejected rather than ignored so typos cannot silently fall
back to defaults. Paths are ``x,y@t`` waypoints and apps are written as
calls, e.g. ``apps = ping(interval=1, timeout=1), download()``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

from .ip import RouterConfig
from .radio import Position, RadioModel
from .traffic import DownloadConfig, PingConfig
from .wifi import (
    ApConfig,
    DhcpMode,
    StationSettings,
    normalize_mac,
    validate_ssid,
)


class ScenarioError(Exception):
    """A scenario file problem, pointing at the offending line when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Waypoint:
    at_s: float
    pos: Position


@dataclass
class AppSpec:
    name: str                      # "ping" or "download"
    params: dict[str, float] = field(default_factory=dict)


@dataclass
class StationSpec:
    name: str
    mac: str
    settings: StationSettings
    waypoints: list[Waypoint]
    apps: list[AppSpec]


@dataclass
class ScenarioConfig:
    router: RouterConfig
    radio: RadioModel
    aps: list[tuple[str, ApConfig]]       # (section name, config)
    stations: list[StationSpec]
    duration_s: float = 60.0
    seed: int = 0


def position_at(waypoints: list[Waypoint], t_s: float) -> Position:
    """Piecewise-linear position along the path, clamped at both ends."""
    if not waypoints:
        return Position(0.0, 0.0)
    if t_s <= waypoints[0].at_s:
        return waypoints[0].pos
    if t_s >= waypoints[-1].at_s:
        return waypoints[-1].pos
    for a, b in zip(waypoints, waypoints[1:]):
        if a.at_s <= t_s <= b.at_s:
            span = b.at_s - a.at_s
            f = 0.0 if span == 0 else (t_s - a.at_s) / span
            return Position(
                a.pos.x + f * (b.pos.x - a.pos.x),
                a.pos.y + f * (b.pos.y - a.pos.y),
            )
    return waypoints[-1].pos


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_SECTION_RE = re.compile(r"^\[\s*([a-z]+)(?:\s+([A-Za-z0-9_.\-]+))?\s*\]$")
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_WAYPOINT_RE = re.compile(rf"^\s*({_NUM})\s*,\s*({_NUM})\s*@\s*({_NUM})\s*$")
_APP_RE = re.compile(r"^\s*([a-z_]+)\s*\(([^()]*)\)\s*$")

_PING_PARAMS = {"interval", "timeout", "retry_step_ms", "retry_cap"}
_DOWNLOAD_PARAMS = {"chunk_kb", "server_resume_delay_s"}


def _parse_float(raw: str, key: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"{key}: expected a number, got {raw!r}", line) from None


def _parse_int(raw: str, key: str, line: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"{key}: expected an integer, got {raw!r}", line) from None


def _parse_position(raw: str, key: str, line: int) -> Position:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ScenarioError(f"{key}: expected 'x,y', got {raw!r}", line)
    return Position(_parse_float(parts[0], key, line), _parse_float(parts[1], key, line))


def _parse_path(raw: str, line: int) -> list[Waypoint]:
    waypoints = []
    for chunk in raw.split(";"):
        if not chunk.strip():
            continue
        m = _WAYPOINT_RE.match(chunk)
        if not m:
            raise ScenarioError(f"path: expected 'x,y@t', got {chunk.strip()!r}", line)
        x, y, t = (float(m.group(i)) for i in (1, 2, 3))
        waypoints.append(Waypoint(t, Position(x, y)))
    if not waypoints:
        raise ScenarioError("path: at least one waypoint required", line)
    for a, b in zip(waypoints, waypoints[1:]):
        if b.at_s <= a.at_s:
            raise ScenarioError("path: waypoints not increasing in time", line)
    return waypoints


def _parse_apps(raw: str, line: int) -> list[AppSpec]:
    apps = []
    for chunk in re.split(r",(?![^()]*\))", raw):
        if not chunk.strip():
            continue
        m = _APP_RE.match(chunk)
        if not m:
            raise ScenarioError(f"apps: expected 'name(k=v, ...)', got {chunk.strip()!r}", line)
        name, body = m.group(1), m.group(2)
        allowed = {"ping": _PING_PARAMS, "download": _DOWNLOAD_PARAMS}.get(name)
        if allowed is None:
            raise ScenarioError(f"apps: unknown app {name!r}", line)
        params: dict[str, float] = {}
        for pair in body.split(","):
            if not pair.strip():
                continue
            if "=" not in pair:
                raise ScenarioError(f"apps: expected 'key=value' in {name}(...)", line)
            k, v = (s.strip() for s in pair.split("=", 1))
            if k not in allowed:
                raise ScenarioError(f"apps: unknown parameter {k!r} for {name}()", line)
            params[k] = _parse_float(v, k, line)
        apps.append(AppSpec(name, params))
    return apps


@dataclass
class _Section:
    kind: str
    name: Optional[str]
    line: int
    entries: list[tuple[int, str, str]] = field(default_factory=list)


def _split_sections(text: str) -> list[_Section]:
    sections: list[_Section] = []
    current: Optional[_Section] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        m = _SECTION_RE.match(line)
        if m:
            kind, name = m.group(1), m.group(2)
            current = _Section(kind, name, lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ScenarioError(f"malformed line: {raw.strip()!r}", lineno)
        if current is None:
            raise ScenarioError("key outside of any [section]", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ScenarioError("empty key", lineno)
        current.entries.append((lineno, key, value))
    return sections


def _apply_entries(
    section: _Section,
    setters: dict[str, Callable[[str, int], None]],
) -> None:
    seen: set[str] = set()
    for lineno, key, value in section.entries:
        if key in seen:
            raise ScenarioError(f"duplicate key {key!r} in [{section.kind}]", lineno)
        seen.add(key)
        setter = setters.get(key)
        if setter is None:
            raise ScenarioError(f"unknown key {key!r} in [{section.kind}] section", lineno)
        setter(value, lineno)


def _float_field(obj, name):
    def set_(value: str, line: int) -> None:
        setattr(obj, name, _parse_float(value, name, line))
    return set_


def _int_field(obj, name):
    def set_(value: str, line: int) -> None:
        setattr(obj, name, _parse_int(value, name, line))
    return set_


def _str_field(obj, name):
    def set_(value: str, line: int) -> None:
        setattr(obj, name, value)
    return set_


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario file, raising ScenarioError on problems."""
    router = RouterConfig()
    radio = RadioModel()
    aps: list[tuple[str, ApConfig]] = []
    stations: list[StationSpec] = []
    duration_s = 60.0
    seed = 0
    sim_line = None

    sections = _split_sections(text)
    for section in sections:
        if section.kind == "router":
            if section.name is not None:
                raise ScenarioError("[router] takes no name", section.line)
            _apply_entries(section, {
                "lan_ip": _str_field(router, "lan_ip"),
                "netmask": _str_field(router, "netmask"),
                "pool_start": _str_field(router, "pool_start"),
                "pool_end": _str_field(router, "pool_end"),
                "lease_time_s": _float_field(router, "lease_time_s"),
                "wan_kbps": _float_field(router, "wan_kbps"),
                "wan_rtt_ms": _float_field(router, "wan_rtt_ms"),
            })
        elif section.kind == "radio":
            _apply_entries(section, {
                name: _float_field(radio, name)
                for name in (
                    "tx_power_dbm", "pl0_db", "ref_dist_m", "exponent",
                    "in_range_dbm", "far_edge_dbm", "disassoc_dbm",
                    "per_max", "overhead",
                )
            })
        elif section.kind == "ap":
            if not section.name:
                raise ScenarioError("[ap] needs a name: [ap <name>]", section.line)
            cfg = ApConfig(bssid="", ssid="", key="", position=Position(0.0, 0.0))
            state: dict = {}

            def set_bssid(value: str, line: int, cfg=cfg) -> None:
                try:
                    cfg.bssid = normalize_mac(value)
                except ValueError as exc:
                    raise ScenarioError(str(exc), line) from None

            def set_ssid(value: str, line: int, cfg=cfg) -> None:
                try:
                    cfg.ssid = validate_ssid(value)
                except ValueError as exc:
                    raise ScenarioError(str(exc), line) from None

            def set_position(value: str, line: int, cfg=cfg) -> None:
                cfg.position = _parse_position(value, "position", line)

            def set_mode(value: str, line: int, cfg=cfg) -> None:
                try:
                    cfg.dhcp_mode = DhcpMode(value.strip().lower())
                except ValueError:
                    raise ScenarioError(
                        f"dhcp_mode: expected 'forwarder' or 'off', got {value!r}", line
                    ) from None

            _apply_entries(section, {
                "bssid": set_bssid,
                "ssid": set_ssid,
                "key": _str_field(cfg, "key"),
                "position": set_position,
                "beacon_interval_ms": _float_field(cfg, "beacon_interval_ms"),
                "lan_ip": _str_field(cfg, "lan_ip"),
                "dhcp_mode": set_mode,
            })
            if not cfg.bssid:
                raise ScenarioError(f"[ap {section.name}] is missing a bssid", section.line)
            if cfg.beacon_interval_ms <= 0:
                raise ScenarioError("beacon_interval_ms must be positive", section.line)
            aps.append((section.name, cfg))
        elif section.kind == "station":
            if not section.name:
                raise ScenarioError("[station] needs a name: [station <name>]", section.line)
            settings = StationSettings()
            holder: dict = {"mac": "", "waypoints": [], "apps": []}

            def set_mac(value: str, line: int, holder=holder) -> None:
                try:
                    holder["mac"] = normalize_mac(value)
                except ValueError as exc:
                    raise ScenarioError(str(exc), line) from None

            def set_ssid(value: str, line: int, settings=settings) -> None:
                try:
                    settings.ssid = validate_ssid(value)
                except ValueError as exc:
                    raise ScenarioError(str(exc), line) from None

            def set_path(value: str, line: int, holder=holder) -> None:
                holder["waypoints"] = _parse_path(value, line)

            def set_apps(value: str, line: int, holder=holder) -> None:
                holder["apps"] = _parse_apps(value, line)

            _apply_entries(section, {
                "mac": set_mac,
                "ssid": set_ssid,
                "key": _str_field(settings, "key"),
                "path": set_path,
                "apps": set_apps,
                "roam_scan_dbm": _float_field(settings, "roam_scan_dbm"),
                "hysteresis_db": _float_field(settings, "hysteresis_db"),
                "scan_interval_s": _float_field(settings, "scan_interval_s"),
                "scan_dwell_ms": _float_field(settings, "scan_dwell_ms"),
                "missed_beacon_limit": _int_field(settings, "missed_beacon_limit"),
            })
            if not holder["mac"]:
                raise ScenarioError(f"[station {section.name}] is missing a mac", section.line)
            if not holder["waypoints"]:
                holder["waypoints"] = [Waypoint(0.0, Position(0.0, 0.0))]
            stations.append(StationSpec(
                section.name, holder["mac"], settings, holder["waypoints"], holder["apps"]
            ))
        elif section.kind == "sim":
            sim_line = section.line
            holder = {"duration_s": duration_s, "seed": seed}

            def set_duration(value: str, line: int, holder=holder) -> None:
                holder["duration_s"] = _parse_float(value, "duration_s", line)

            def set_seed(value: str, line: int, holder=holder) -> None:
                holder["seed"] = _parse_int(value, "seed", line)

            _apply_entries(section, {"duration_s": set_duration, "seed": set_seed})
            duration_s = holder["duration_s"]
            seed = holder["seed"]
        else:
            raise ScenarioError(f"unknown section [{section.kind}]", section.line)

    config = ScenarioConfig(router, radio, aps, stations, duration_s, seed)
    _validate_config(config, sim_line)
    return config


def _validate_config(config: ScenarioConfig, sim_line: Optional[int]) -> None:
    if not config.aps:
        raise ScenarioError("at least one AP required")
    if not config.stations:
        raise ScenarioError("at least one station required")
    if config.duration_s <= 0:
        raise ScenarioError("duration_s must be positive", sim_line)
    try:
        config.radio.validate()
        config.router.validate()
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    seen_bssids: set[str] = set()
    for name, ap in config.aps:
        if ap.bssid in seen_bssids:
            raise ScenarioError(f"duplicate bssid {ap.bssid} (ap {name})")
        seen_bssids.add(ap.bssid)
    seen_macs = set(seen_bssids)
    for st in config.stations:
        if st.mac in seen_macs:
            raise ScenarioError(f"duplicate mac {st.mac} (station {st.name})")
        seen_macs.add(st.mac)
        for app in st.apps:
            try:
                if app.name == "ping":
                    ping_config(app).validate()
                elif app.name == "download":
                    download_config(app).validate()
            except ValueError as exc:
                raise ScenarioError(f"station {st.name}: {exc}") from None


def ping_config(app: AppSpec) -> PingConfig:
    p = app.params
    return PingConfig(
        interval_s=p.get("interval", 1.0),
        timeout_s=p.get("timeout", 1.0),
        retry_step_ms=p.get("retry_step_ms", 150.0),
        retry_cap=int(p.get("retry_cap", 5)),
    )


def download_config(app: AppSpec) -> DownloadConfig:
    p = app.params
    return DownloadConfig(
        chunk_kb=int(p.get("chunk_kb", 64)),
        server_resume_delay_s=p.get("server_resume_delay_s", 37.0),
    )


# --------------------------------------------------------------------------
# Rendering (canonical serializer; parse(render(c)) == c)
# --------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_scenario(config: ScenarioConfig) -> str:
    out: list[str] = []

    out.append("[router]")
    r = config.router
    for name in ("lan_ip", "netmask", "pool_start", "pool_end"):
        out.append(f"{name} = {getattr(r, name)}")
    for name in ("lease_time_s", "wan_kbps", "wan_rtt_ms"):
        out.append(f"{name} = {_fmt(getattr(r, name))}")
    out.append("")

    out.append("[radio]")
    for f in fields(RadioModel):
        out.append(f"{f.name} = {_fmt(getattr(config.radio, f.name))}")
    out.append("")

    for name, ap in config.aps:
        out.append(f"[ap {name}]")
        out.append(f"bssid = {ap.bssid}")
        out.append(f"ssid = {ap.ssid}")
        out.append(f"key = {ap.key}")
        out.append(f"position = {_fmt(ap.position.x)},{_fmt(ap.position.y)}")
        out.append(f"beacon_interval_ms = {_fmt(ap.beacon_interval_ms)}")
        out.append(f"lan_ip = {ap.lan_ip}")
        out.append(f"dhcp_mode = {ap.dhcp_mode.value}")
        out.append("")

    for st in config.stations:
        out.append(f"[station {st.name}]")
        out.append(f"mac = {st.mac}")
        out.append(f"ssid = {st.settings.ssid}")
        out.append(f"key = {st.settings.key}")
        path = "; ".join(
            f"{_fmt(w.pos.x)},{_fmt(w.pos.y)}@{_fmt(w.at_s)}" for w in st.waypoints
        )
        out.append(f"path = {path}")
        if st.apps:
            rendered = []
            for app in st.apps:
                body = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(app.params.items()))
                rendered.append(f"{app.name}({body})")
            out.append(f"apps = {', '.join(rendered)}")
        for name in ("roam_scan_dbm", "hysteresis_db", "scan_interval_s", "scan_dwell_ms"):
            out.append(f"{name} = {_fmt(getattr(st.settings, name))}")
        out.append(f"missed_beacon_limit = {st.settings.missed_beacon_limit}")
        out.append("")

    out.append("[sim]")
    out.append(f"duration_s = {_fmt(config.duration_s)}")
    out.append(f"seed = {config.seed}")
    out.append("")
    return "\n".join(out)
