"""Wire a parsed scenario into a runnable node graph and collect the outputs.

One ``Simulation`` owns one engine, one router, and the AP/station nodes of
a single scenario. Instances share no state, so independent scenarios can
run concurrently (one instance per worker); a single instance must only be
driven from one thread at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import ip as ipmod
from . import wifi
from .engine import Engine, micros, seconds
from .radio import CoverageRegime, effective_capacity, per, regime, rssi_at
from .scenario import ScenarioConfig, StationSpec, download_config, ping_config, position_at
from .traffic import (
    DownloadApp,
    HandoffReport,
    MetricsLog,
    PingApp,
    Sample,
    SummaryTable,
    derive_windows,
    detect_handoff,
    render_summary,
    summarize,
)

SAMPLE_INTERVAL_US = 1_000_000


@dataclass
class StationFinal:
    mac: str
    bssid: Optional[str]
    ip: Optional[str]
    ips_held: list[str]


@dataclass
class SimResult:
    seed: int
    duration_s: float
    events_processed: int
    logs: dict[str, MetricsLog]          # keyed by station MAC, insertion order
    frames: str                          # management/DHCP frame trace
    leases: str                          # final lease table dump
    summary: SummaryTable
    handoff: Optional[HandoffReport]
    stations: list[StationFinal]

    @property
    def primary_log(self) -> MetricsLog:
        return next(iter(self.logs.values()))

    @property
    def csv(self) -> str:
        return self.primary_log.to_csv()

    @property
    def summary_text(self) -> str:
        return render_summary(self.summary, self.handoff)


class _StationRuntime:
    """Per-station service state: DHCP client, apps, bookkeeping."""

    def __init__(self, spec: StationSpec):
        self.spec = spec
        self.node: Optional[wifi.StationNode] = None  # set by Simulation
        self.dhcp: Optional[ipmod.DhcpClient] = None
        self.ping: Optional[PingApp] = None
        self.download: Optional[DownloadApp] = None
        self.log: MetricsLog = MetricsLog(spec.mac)
        self.ips_held: list[str] = []
        self.service_up = False
        self.last_download_kBps = 0.0


class Simulation:
    def __init__(self, config: ScenarioConfig, seed: Optional[int] = None):
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.engine = Engine(self.seed)
        self.radio = config.radio
        self.radio.validate()
        self.dhcp_server = ipmod.DhcpServer(config.router)
        self.frame_lines: list[str] = []

        self.ap_nodes = [
            wifi.ApNode(self, cfg, index) for index, (_name, cfg) in enumerate(config.aps)
        ]
        self._aps_by_bssid = {ap.cfg.bssid: ap for ap in self.ap_nodes}

        self._runtimes: dict[str, _StationRuntime] = {}
        self.station_nodes: list[wifi.StationNode] = []
        for index, spec in enumerate(config.stations):
            rt = _StationRuntime(spec)
            waypoints = spec.waypoints
            node = wifi.StationNode(
                self,
                spec.mac,
                spec.settings,
                lambda t_s, waypoints=waypoints: position_at(waypoints, t_s),
                index,
            )
            rt.node = node
            node.dhcp = rt.dhcp = ipmod.DhcpClient(
                self.engine,
                spec.mac,
                send_fn=lambda msg, st=node: self._dhcp_uplink(st, msg),
                on_bound=lambda ip_addr, rt=rt: self._on_bound(rt, ip_addr),
                on_unbound=lambda rt=rt: self._refresh_service(rt),
                on_failure=lambda rt=rt: rt.log.add_event(
                    seconds(self.engine.clock), "dhcp_failure"
                ),
            )
            for app in spec.apps:
                if app.name == "ping":
                    rt.ping = PingApp(ping_config(app), config.router.wan_rtt_ms)
                elif app.name == "download":
                    rt.download = DownloadApp(download_config(app))
            self._runtimes[spec.mac] = rt
            self.station_nodes.append(node)

    # -- lookups used by the wifi layer -------------------------------------

    def ap_by_bssid(self, bssid: str) -> Optional[wifi.ApNode]:
        return self._aps_by_bssid.get(bssid)

    def station_by_mac(self, mac: str) -> Optional[wifi.StationNode]:
        rt = self._runtimes.get(mac)
        return rt.node if rt else None

    def rssi(self, ap: wifi.ApNode, station: wifi.StationNode) -> float:
        return rssi_at(self.radio, ap.cfg.position, station.position())

    def data_frame_lost(self, station: wifi.StationNode, ap: wifi.ApNode) -> bool:
        return self.engine.rng.random() < per(self.radio, self.rssi(ap, station))

    # -- tracing and events ---------------------------------------------------

    def trace(self, frame: wifi.MgmtFrame) -> None:
        self.frame_lines.append(
            f"{self.engine.clock} {frame.kind.value} {frame.src} {frame.dst} "
            f"{frame.ssid or '-'} {frame.status or '-'}"
        )

    def trace_data(self, kind: str, src: str, dst: str, status: str = "") -> None:
        self.frame_lines.append(
            f"{self.engine.clock} {kind} {src} {dst} - {status or '-'}"
        )

    def log_event(self, mac: str, kind: str, **data) -> None:
        rt = self._runtimes.get(mac)
        if rt is not None:
            rt.log.add_event(seconds(self.engine.clock), kind, **data)

    # -- association/service bookkeeping ---------------------------------------

    def on_station_associated(self, station: wifi.StationNode, ap: wifi.ApNode, roamed: bool) -> None:
        rt = self._runtimes[station.mac]
        rt.log.add_event(
            seconds(self.engine.clock), "associated", bssid=ap.cfg.bssid, roamed=roamed
        )
        rt.dhcp.on_associated()
        self._refresh_service(rt)

    def on_station_disassociated(self, station: wifi.StationNode, reason: str) -> None:
        rt = self._runtimes[station.mac]
        rt.log.add_event(seconds(self.engine.clock), "disassociated", reason=reason)
        rt.dhcp.on_link_down()
        self._refresh_service(rt)

    def _on_bound(self, rt: _StationRuntime, ip_addr: str) -> None:
        rt.log.add_event(seconds(self.engine.clock), "lease", ip=ip_addr)
        if ip_addr not in rt.ips_held:
            rt.ips_held.append(ip_addr)
        self._refresh_service(rt)

    def _refresh_service(self, rt: _StationRuntime) -> None:
        up = rt.node.associated and rt.dhcp.ip is not None
        if up != rt.service_up:
            rt.service_up = up
            if rt.download is not None:
                rt.download.service_edge(up, self.engine.clock)

    # -- DHCP transport ---------------------------------------------------------

    def _dhcp_uplink(self, station: wifi.StationNode, msg: ipmod.DhcpMessage) -> None:
        """Client broadcast -> current AP (lossy air) -> router (wired)."""
        ap = station.current_ap()
        if ap is None:
            return
        if self.data_frame_lost(station, ap):
            self.trace_data(msg.kind.value, station.mac, ap.cfg.bssid, "lost")
            return
        self.trace_data(msg.kind.value, station.mac, ap.cfg.bssid)
        self.engine.call_in(
            wifi.WIRELESS_HOP_US, lambda: self._ap_forward(ap, msg), "dhcp_uplink"
        )

    def _ap_forward(self, ap: wifi.ApNode, msg: ipmod.DhcpMessage) -> None:
        relayed = ipmod.forward(ap.cfg, msg)
        if relayed is None:
            self.trace_data(msg.kind.value, ap.cfg.bssid, "router", "dropped")
            return
        self.engine.call_in(
            wifi.WIRED_HOP_US, lambda: self._router_handle(relayed), "dhcp_relay"
        )

    def _router_handle(self, msg: ipmod.DhcpMessage) -> None:
        reply = self.dhcp_server.handle(msg, self.engine.clock)
        if reply is None or reply.relay_ap is None:
            return
        ap = self.ap_by_bssid(reply.relay_ap)
        if ap is None:
            return
        rt = self._runtimes.get(reply.client_mac)
        if rt is None:
            return
        self.engine.call_in(
            wifi.WIRED_HOP_US,
            lambda: ap.deliver_downstream(
                reply.client_mac,
                reply.kind.value,
                lambda: rt.dhcp.on_message(reply),
            ),
            "dhcp_downlink",
        )

    # -- traffic ticks -------------------------------------------------------------

    def _loss_p_for(self, rt: _StationRuntime) -> Optional[float]:
        """Data-plane loss probability, or None when there is no service."""
        if not rt.service_up:
            return None
        rssi = rt.node.current_rssi()
        if rssi is None:
            return None
        return per(self.radio, rssi)

    def _ping_tick(self, rt: _StationRuntime) -> None:
        rt.ping.tick(self.engine.clock, self.engine.rng, self._loss_p_for(rt))
        self.engine.call_in(
            micros(rt.ping.cfg.interval_s), lambda: self._ping_tick(rt), "ping"
        )

    def _download_tick(self, rt: _StationRuntime) -> None:
        rssi = rt.node.current_rssi()
        capacity = (
            effective_capacity(self.radio, self.config.router.wan_kbps, rssi)
            if (rt.service_up and rssi is not None)
            else 0.0
        )
        rt.last_download_kBps = rt.download.tick(self.engine.clock, capacity, self.radio.overhead)
        self.engine.call_in(
            SAMPLE_INTERVAL_US, lambda: self._download_tick(rt), "download"
        )

    def _sample_tick(self, rt: _StationRuntime) -> None:
        now = self.engine.clock
        rssi = rt.node.current_rssi()
        if rt.node.associated and rssi is not None:
            reg = regime(self.radio, rssi).value
            bssid = rt.node.conn.current_bssid
        else:
            reg = CoverageRegime.OUT_OF_RANGE.value
            bssid = None
        bandwidth = (
            effective_capacity(self.radio, self.config.router.wan_kbps, rssi)
            if rt.service_up and rssi is not None
            else 0.0
        )
        tput = rt.last_download_kBps if rt.download else 0.0
        rtt, rto = (None, None)
        if rt.ping is not None:
            rtt, rto = rt.ping.take_sample(now - SAMPLE_INTERVAL_US + 1)
        rt.log.add_sample(Sample(
            t_s=seconds(now),
            bssid=bssid,
            ip=rt.dhcp.ip,
            regime=reg,
            rssi_dbm=rssi,
            bandwidth_kbps=bandwidth,
            throughput_kBps=tput,
            rtt_ms=rtt,
            rto=rto,
        ))
        self.engine.call_in(SAMPLE_INTERVAL_US, lambda: self._sample_tick(rt), "sample")

    # -- run -------------------------------------------------------------------------

    def run(self) -> SimResult:
        if getattr(self, "_ran", False):
            raise RuntimeError("a Simulation instance runs once; build a new one")
        self._ran = True
        for ap in self.ap_nodes:
            ap.start()
        for node in self.station_nodes:
            node.start()
        for rt in self._runtimes.values():
            if rt.ping is not None:
                self.engine.schedule(
                    micros(rt.ping.cfg.interval_s), lambda rt=rt: self._ping_tick(rt), "ping"
                )
            if rt.download is not None:
                self.engine.schedule(
                    SAMPLE_INTERVAL_US, lambda rt=rt: self._download_tick(rt), "download"
                )
        for rt in self._runtimes.values():
            self.engine.schedule(
                SAMPLE_INTERVAL_US, lambda rt=rt: self._sample_tick(rt), "sample"
            )

        stats = self.engine.run_until(micros(self.config.duration_s))

        primary = next(iter(self._runtimes.values()))
        handoff = detect_handoff(primary.log)
        windows = derive_windows(primary.log, handoff)
        summary = summarize(primary.log, windows) if primary.log.samples else SummaryTable([])
        finals = [
            StationFinal(
                mac=rt.spec.mac,
                bssid=rt.node.conn.current_bssid,
                ip=rt.dhcp.ip,
                ips_held=list(rt.ips_held),
            )
            for rt in self._runtimes.values()
        ]
        return SimResult(
            seed=self.seed,
            duration_s=self.config.duration_s,
            events_processed=stats.processed,
            logs={mac: rt.log for mac, rt in self._runtimes.items()},
            frames="\n".join(self.frame_lines) + ("\n" if self.frame_lines else ""),
            leases=self.dhcp_server.dump(self.engine.clock),
            summary=summary,
            handoff=handoff,
            stations=finals,
        )


def run_scenario(config: ScenarioConfig, seed: Optional[int] = None) -> SimResult:
    return Simulation(config, seed).run()
