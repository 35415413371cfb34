"""Measurement workloads (periodic ping, bulk download) and the metrics pipeline.

The per-second sample log is the source of every report: the CSV export,
the per-regime summary table, and the handoff report with its outage
bounds, timeout count, and throughput-recovery delay.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .engine import SimTime

CSV_HEADER = "t_s,bssid,ip,regime,rssi_dbm,bandwidth_kbps,throughput_kBps,rtt_ms,rto"

# Fixed local overhead added to the WAN round trip for every echo.
PING_BASE_OVERHEAD_MS = 10.0

# Width of the "far from the AP" measurement window used by the default
# summary: the last seconds of degraded service before the link breaks.
FAR_EDGE_WINDOW_S = 20.0


@dataclass
class PingConfig:
    interval_s: float = 1.0
    timeout_s: float = 1.0
    retry_step_ms: float = 150.0  # added latency per link-layer retransmission
    retry_cap: int = 5

    def validate(self) -> None:
        if self.interval_s <= 0 or self.timeout_s <= 0:
            raise ValueError("ping interval and timeout must be positive")
        if self.timeout_s > self.interval_s:
            raise ValueError("ping timeout must not exceed the interval")
        if self.retry_cap < 0 or self.retry_step_ms < 0:
            raise ValueError("retry parameters must be non-negative")


@dataclass
class DownloadConfig:
    chunk_kb: int = 64
    server_resume_delay_s: float = 37.0

    def validate(self) -> None:
        if self.chunk_kb <= 0:
            raise ValueError("chunk_kb must be positive")
        if self.server_resume_delay_s < 0:
            raise ValueError("server_resume_delay_s must be non-negative")


def draw_echo_retries(rng: random.Random, loss_p: float, cap: int) -> Optional[int]:
    """Total link-layer retransmissions for one echo, or None past the cap.

    The echo and its reply each survive a transmission with probability
    1-loss_p, so the retry count is the sum of two geometric draws; losing
    more than ``cap`` transmissions in total is reported as a timeout.
    """
    retries = 0
    for _direction in range(2):
        while rng.random() < loss_p:
            retries += 1
            if retries > cap:
                return None
    return retries


def ping_rtt_ms(cfg: PingConfig, wan_rtt_ms: float, retries: int) -> float:
    return wan_rtt_ms + PING_BASE_OVERHEAD_MS + retries * cfg.retry_step_ms


class PingApp:
    """Periodic echo toward the router's WAN side; one sample per interval."""

    def __init__(self, cfg: PingConfig, wan_rtt_ms: float):
        cfg.validate()
        self.cfg = cfg
        self.wan_rtt_ms = wan_rtt_ms
        self.last_t_us: Optional[SimTime] = None
        self.last_rtt_ms: Optional[float] = None  # None = timed out

    def tick(self, now_us: SimTime, rng: random.Random, loss_p: Optional[float]) -> Optional[float]:
        """Run one echo. ``loss_p`` None means no association or no lease."""
        self.last_t_us = now_us
        if loss_p is None:
            self.last_rtt_ms = None
            return None
        retries = draw_echo_retries(rng, loss_p, self.cfg.retry_cap)
        if retries is None:
            self.last_rtt_ms = None
            return None
        self.last_rtt_ms = ping_rtt_ms(self.cfg, self.wan_rtt_ms, retries)
        return self.last_rtt_ms

    def take_sample(self, window_start_us: SimTime) -> tuple[Optional[float], Optional[int]]:
        """(rtt_ms, rto_flag) for the most recent echo in the current window."""
        if self.last_t_us is None or self.last_t_us < window_start_us:
            return None, None
        if self.last_rtt_ms is None:
            return None, 1
        return self.last_rtt_ms, 0


class DownloadApp:
    """Greedy bulk transfer: delivers at the link's usable rate while the
    station has service, stalls on the server side after every outage."""

    def __init__(self, cfg: DownloadConfig):
        cfg.validate()
        self.cfg = cfg
        self._up_since_us: Optional[SimTime] = None
        self._resume_at_us: SimTime = 0
        self._delivered_any = False
        self._last_tick_us: SimTime = 0

    def service_edge(self, up: bool, now_us: SimTime) -> None:
        if up:
            self._up_since_us = now_us
            if self._delivered_any:
                # The far end noticed the drop; it resumes only after a pause.
                self._resume_at_us = now_us + int(self.cfg.server_resume_delay_s * 1e6)
        else:
            self._up_since_us = None

    def tick(self, now_us: SimTime, capacity_kbps: float, overhead: float) -> float:
        """Kilobytes/second delivered over the window ending at ``now_us``."""
        window_start = self._last_tick_us
        self._last_tick_us = now_us
        if self._up_since_us is None or capacity_kbps <= 0:
            return 0.0
        live_from = max(window_start, self._up_since_us, self._resume_at_us)
        live_us = max(0, now_us - live_from)
        if live_us == 0:
            return 0.0
        window_us = max(1, now_us - window_start)
        rate_kBps = capacity_kbps * overhead / 8.0
        delivered = rate_kBps * (live_us / 1e6)
        if delivered > 0:
            self._delivered_any = True
        return delivered / (window_us / 1e6)


# --------------------------------------------------------------------------
# Metrics log
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    t_s: float
    bssid: Optional[str]
    ip: Optional[str]
    regime: str
    rssi_dbm: Optional[float]
    bandwidth_kbps: float
    throughput_kBps: float
    rtt_ms: Optional[float]
    rto: Optional[int]  # 1 timeout, 0 reply, None when no echo ran


@dataclass(frozen=True)
class LogEvent:
    t_s: float
    kind: str
    data: dict


class MetricsLog:
    """Per-station time series plus the event history behind the reports."""

    def __init__(self, mac: str):
        self.mac = mac
        self.samples: list[Sample] = []
        self.events: list[LogEvent] = []

    def add_sample(self, sample: Sample) -> None:
        if self.samples and sample.t_s <= self.samples[-1].t_s:
            raise ValueError("sample timestamps must be strictly increasing")
        self.samples.append(sample)

    def add_event(self, t_s: float, kind: str, **data) -> None:
        self.events.append(LogEvent(t_s, kind, data))

    def events_of(self, kind: str) -> list[LogEvent]:
        return [e for e in self.events if e.kind == kind]

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for s in self.samples:
            rssi = f"{s.rssi_dbm:.2f}" if s.rssi_dbm is not None else ""
            rtt = f"{s.rtt_ms:.0f}" if s.rtt_ms is not None else ""
            rto = "" if s.rto is None else str(s.rto)
            lines.append(
                f"{s.t_s:.0f},{s.bssid or ''},{s.ip or ''},{s.regime},{rssi},"
                f"{s.bandwidth_kbps:.3f},{s.throughput_kBps:.3f},{rtt},{rto}"
            )
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Handoff report
# --------------------------------------------------------------------------


@dataclass
class HandoffReport:
    outage_start_s: float
    outage_end_s: float
    rto_count: int
    throughput_recovery_s: Optional[float]

    def validate(self) -> None:
        if self.outage_end_s < self.outage_start_s or self.rto_count < 0:
            raise ValueError("malformed handoff report")


def detect_handoff(log: MetricsLog) -> Optional[HandoffReport]:
    """Measure the first AP switch in the log.

    The outage runs from the last answered echo before the link broke to the
    first answered echo on the new AP; the recovery delay is counted from the
    outage start to the first one-second window whose throughput is back to
    at least 90% of the pre-outage mean. Returns None when the station never
    switched APs.
    """
    assocs = log.events_of("associated")
    if not assocs:
        return None
    first_bssid = assocs[0].data["bssid"]
    switch = next((e for e in assocs if e.data["bssid"] != first_bssid), None)
    if switch is None:
        return None
    breaks = [e for e in log.events_of("disassociated") if e.t_s <= switch.t_s]
    break_t = breaks[-1].t_s if breaks else switch.t_s

    answered = [s for s in log.samples if s.rto == 0]
    before = [s for s in answered if s.t_s <= break_t]
    outage_start = before[-1].t_s if before else (log.samples[0].t_s if log.samples else 0.0)
    after = [s for s in answered if s.t_s >= switch.t_s]
    outage_end = after[0].t_s if after else (log.samples[-1].t_s if log.samples else break_t)

    rto_count = sum(
        1 for s in log.samples if s.rto == 1 and outage_start < s.t_s <= outage_end
    )

    pre = [s.throughput_kBps for s in log.samples if s.t_s <= outage_start]
    pre_mean = sum(pre) / len(pre) if pre else 0.0
    recovery = None
    if pre_mean > 0:
        for s in log.samples:
            if s.t_s > outage_start and s.t_s >= switch.t_s and s.throughput_kBps >= 0.9 * pre_mean:
                recovery = s.t_s - outage_start
                break
    report = HandoffReport(outage_start, outage_end, rto_count, recovery)
    report.validate()
    return report


# --------------------------------------------------------------------------
# Regime summary
# --------------------------------------------------------------------------


@dataclass
class RegimeStats:
    name: str
    t_start: float
    t_end: float
    n_samples: int
    bandwidth_kbps: Optional[float]
    bandwidth_range: tuple[float, float] | None
    throughput_kBps: Optional[float]
    throughput_range: tuple[float, float] | None
    ping_ms: Optional[float]
    rto_count: int
    disconnected: bool


@dataclass
class SummaryTable:
    columns: list[RegimeStats]

    def column(self, name: str) -> Optional[RegimeStats]:
        return next((c for c in self.columns if c.name == name), None)


def _window_stats(log: MetricsLog, name: str, t0: float, t1: float) -> RegimeStats:
    rows = [s for s in log.samples if t0 <= s.t_s <= t1]
    rtts = [s.rtt_ms for s in rows if s.rtt_ms is not None]
    rtos = sum(1 for s in rows if s.rto == 1)
    bws = [s.bandwidth_kbps for s in rows]
    tputs = [s.throughput_kBps for s in rows]
    disconnected = bool(rows) and all(s.bssid is None for s in rows)
    return RegimeStats(
        name=name,
        t_start=t0,
        t_end=t1,
        n_samples=len(rows),
        bandwidth_kbps=sum(bws) / len(bws) if bws else None,
        bandwidth_range=(min(bws), max(bws)) if bws else None,
        throughput_kBps=sum(tputs) / len(tputs) if tputs else None,
        throughput_range=(min(tputs), max(tputs)) if tputs else None,
        ping_ms=sum(rtts) / len(rtts) if rtts else None,
        rto_count=rtos,
        disconnected=disconnected,
    )


def summarize(log: MetricsLog, regime_windows: dict[str, tuple[float, float]]) -> SummaryTable:
    """Per-window means in the shape of the before/after measurement tables.

    ``regime_windows`` maps a column name to a closed [t0, t1] interval of
    sample times; the caller decides where each measurement zone lies (see
    ``derive_windows`` for the default policy).
    """
    if not log.samples:
        raise ValueError("cannot summarize an empty log")
    return SummaryTable([_window_stats(log, n, t0, t1) for n, (t0, t1) in regime_windows.items()])


def derive_windows(
    log: MetricsLog,
    report: Optional[HandoffReport],
    far_edge_window_s: float = FAR_EDGE_WINDOW_S,
) -> dict[str, tuple[float, float]]:
    """Default measurement windows mirroring the walk-away experiment.

    near the AP -> the initial in-range plateau; far from the AP -> the last
    seconds of degraded service before the link breaks; the roaming area ->
    the outage itself; after the switch (or, with a single AP, after the
    connection is lost) -> the remainder of the run.
    """
    if not log.samples:
        return {}
    t_last = log.samples[-1].t_s
    in_end = log.samples[0].t_s
    for s in log.samples:
        if s.regime == "in_range":
            in_end = s.t_s
        else:
            break
    windows: dict[str, tuple[float, float]] = {"in_range": (log.samples[0].t_s, in_end)}
    if report is not None:
        windows["far_edge"] = (report.outage_start_s - far_edge_window_s, report.outage_start_s)
        windows["roam_area"] = (report.outage_start_s, report.outage_end_s)
        windows["post_roam"] = (report.outage_end_s, t_last)
        return windows
    # No handoff: anchor on the last degraded-but-alive stretch, then the
    # disconnected tail.
    fe = [s.t_s for s in log.samples if s.regime == "far_edge" and s.bssid is not None]
    if fe:
        windows["far_edge"] = (fe[-1] - far_edge_window_s, fe[-1])
    dead = [s.t_s for s in log.samples if s.bssid is None and s.t_s > in_end]
    if dead:
        windows["out_of_range"] = (dead[0], t_last)
    return windows


def render_summary(table: SummaryTable, report: Optional[HandoffReport]) -> str:
    """Plain-text regime table plus the handoff line, stable across runs."""
    names = {
        "in_range": "In range",
        "far_edge": "Far edge",
        "roam_area": "Roam area",
        "post_roam": "Post roam",
        "out_of_range": "Out of range",
    }

    def fmt(col: RegimeStats, row: str) -> str:
        if col.disconnected:
            return "disconnected"
        if col.n_samples == 0:
            return "-"
        if row == "bandwidth":
            if col.name == "roam_area" and col.bandwidth_range is not None:
                lo, hi = col.bandwidth_range
                return f"{lo:.1f}-{hi:.1f}"
            return f"{col.bandwidth_kbps:.1f}"
        if row == "throughput":
            if col.name == "roam_area" and col.throughput_range is not None:
                lo, hi = col.throughput_range
                return f"{lo:.1f}-{hi:.1f}"
            return f"{col.throughput_kBps:.1f}"
        if row == "ping":
            if col.ping_ms is None:
                return "RTO" if col.rto_count else "-"
            if col.rto_count:
                return f"RTO-{col.ping_ms:.0f}ms"
            return f"{col.ping_ms:.0f}ms"
        return str(col.rto_count)

    headers = [names.get(c.name, c.name) for c in table.columns]
    rows = [
        ("Bandwidth (kbps)", "bandwidth"),
        ("Throughput (KB/s)", "throughput"),
        ("Ping time", "ping"),
        ("RTO count", "rto"),
    ]
    width = 18
    lines = ["Test".ljust(width) + "".join(h.ljust(width) for h in headers)]
    for label, row in rows:
        cells = [fmt(c, row) for c in table.columns]
        lines.append(label.ljust(width) + "".join(c.ljust(width) for c in cells))
    if report is not None:
        rec = (
            f"{report.throughput_recovery_s:.1f} s"
            if report.throughput_recovery_s is not None
            else "never"
        )
        lines.append(
            f"Handoff: outage {report.outage_start_s:.1f}s..{report.outage_end_s:.1f}s, "
            f"{report.rto_count} timeouts, throughput recovery {rec}"
        )
    else:
        lines.append("Handoff: none detected")
    return "\n".join(lines) + "\n"
