"""802.11-style management plane: beacons, probing, auth/assoc, roaming.

``ApNode`` and ``StationNode`` hold the per-device state machines. They talk
to the rest of the world through a ``net`` object (normally
``simulation.Simulation``) that provides:

    engine            the event engine (clock, scheduling, rng)
    radio             the RadioModel in force
    ap_nodes          ordered list of ApNode
    station_nodes     ordered list of StationNode
    rssi(ap, st)      signal strength of ``ap`` at the station's position
    trace(frame: MgmtFrame)                  frame-trace hook
    log_event(station_mac, kind, **fields)   metrics event hook
    on_station_associated(st, ap, roamed)    service bookkeeping
    on_station_disassociated(st, reason)
    data_frame_lost(st, ap)   Bernoulli loss draw for data-plane frames

Management frames (beacons, probes, auth/assoc) are sent at the base rate
and modelled as reliable whenever the receiver is above the disassociation
threshold; only data-plane traffic is subject to the error-rate ramp. State
machines mutate only inside engine callbacks, one thread per simulation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .engine import SimTime, micros
from .radio import Position

MacAddress = str
BROADCAST: MacAddress = "ff:ff:ff:ff:ff:ff"

# One-way delays, microseconds.
WIRELESS_HOP_US = 2_000
WIRED_HOP_US = 1_000

HANDSHAKE_TIMEOUT_US = 1_000_000
BUFFER_FLUSH_MAX = 10

_MAC_RE = re.compile(r"^([0-9a-fA-F]{2}[:\-]){5}[0-9a-fA-F]{2}$")


def normalize_mac(text: str) -> MacAddress:
    """Canonical lowercase colon-separated form; raises ValueError if malformed."""
    if not _MAC_RE.match(text.strip()):
        raise ValueError(f"malformed MAC address: {text!r}")
    return text.strip().lower().replace("-", ":")


def validate_ssid(ssid: str) -> str:
    if len(ssid.encode("utf-8")) > 32:
        raise ValueError(f"SSID longer than 32 bytes: {ssid!r}")
    return ssid


def ssid_matches(wanted: str, ap_ssid: str) -> bool:
    """Empty ``wanted`` is the wildcard accepting any network name."""
    return wanted == "" or wanted == ap_ssid


class DhcpMode(str, Enum):
    FORWARDER = "forwarder"
    OFF = "off"


class FrameKind(str, Enum):
    BEACON = "beacon"
    PROBE_REQ = "probe_req"
    PROBE_RESP = "probe_resp"
    AUTH_REQ = "auth_req"
    AUTH_RESP = "auth_resp"
    ASSOC_REQ = "assoc_req"
    ASSOC_RESP = "assoc_resp"
    DISASSOC = "disassoc"
    HANDOFF_NOTICE = "handoff_notice"


@dataclass(frozen=True)
class MgmtFrame:
    kind: FrameKind
    src: MacAddress
    dst: MacAddress
    ssid: str = ""
    status: str = ""


@dataclass
class ApConfig:
    """One access point: bridge between the air and the router LAN.

    The WAN side is disabled; with ``dhcp_mode=FORWARDER`` the AP relays
    client DHCP to the central server and never allocates addresses itself.
    """

    bssid: MacAddress
    ssid: str
    key: str
    position: Position
    beacon_interval_ms: float = 100.0
    lan_ip: str = "192.168.1.1"
    dhcp_mode: DhcpMode = DhcpMode.FORWARDER


@dataclass
class StationSettings:
    """Station-side network selection and roaming knobs."""

    ssid: str = ""            # empty = wildcard, join any network
    key: str = ""
    roam_scan_dbm: float = -75.0
    hysteresis_db: float = 5.0
    scan_interval_s: float = 2.0
    scan_dwell_ms: float = 200.0  # per AP channel
    missed_beacon_limit: int = 3


class ConnState(str, Enum):
    IDLE = "idle"
    SCANNING = "scanning"
    AUTHENTICATING = "authenticating"
    ASSOCIATING = "associating"
    ASSOCIATED = "associated"


@dataclass(frozen=True)
class Candidate:
    bssid: MacAddress
    ssid: str
    rssi: float


@dataclass
class StationConn:
    """Observable association state of one station."""

    state: ConnState = ConnState.IDLE
    current_bssid: Optional[MacAddress] = None
    candidates: list[Candidate] = field(default_factory=list)
    missed_beacons: int = 0


def select_ap(candidates: list[Candidate]) -> Optional[MacAddress]:
    """Strongest signal wins; ties go to the lexicographically smallest BSSID."""
    if not candidates:
        return None
    best = min(candidates, key=lambda c: (-c.rssi, c.bssid))
    return best.bssid


def pick_roam_target(
    current_bssid: MacAddress,
    current_rssi: float,
    candidates: list[Candidate],
    hysteresis_db: float,
) -> Optional[Candidate]:
    """The candidate to roam to, or None to stay put.

    A switch requires a different AP whose signal beats the current one by
    more than the hysteresis margin, which is what keeps a station from
    flapping between two comparable APs.
    """
    best_bssid = select_ap(candidates)
    if best_bssid is None or best_bssid == current_bssid:
        return None
    best = next(c for c in candidates if c.bssid == best_bssid)
    if best.rssi > current_rssi + hysteresis_db:
        return best
    return None


class ApNode:
    """Access point behaviour: beaconing, probe/auth/assoc handling, buffering."""

    def __init__(self, net, cfg: ApConfig, index: int):
        self.net = net
        self.cfg = cfg
        self.index = index
        self.clients: set[MacAddress] = set()
        # Downstream frames held for stations that just left us, flushed to
        # the new AP when it announces the handoff.
        self._buffers: dict[MacAddress, list[tuple[str, Callable[[], None]]]] = {}

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        # Stagger the first beacon per AP so simultaneous events keep a
        # stable, explicit order.
        self.net.engine.call_in(self.index * 10_000, self._beacon_tick, "beacon")

    def _beacon_tick(self) -> None:
        self.net.trace(MgmtFrame(FrameKind.BEACON, self.cfg.bssid, BROADCAST, self.cfg.ssid))
        for st in self.net.station_nodes:
            if self.net.rssi(self, st) >= self.net.radio.disassoc_dbm:
                self.net.engine.call_in(
                    WIRELESS_HOP_US, lambda st=st: st.on_beacon(self), "beacon_rx"
                )
        self.net.engine.call_in(
            micros(self.cfg.beacon_interval_ms / 1000.0), self._beacon_tick, "beacon"
        )

    # -- probe / auth / assoc ------------------------------------------------

    def on_probe_req(self, station: "StationNode", wanted_ssid: str) -> None:
        if not ssid_matches(wanted_ssid, self.cfg.ssid):
            return
        if self.net.rssi(self, station) < self.net.radio.disassoc_dbm:
            return
        self.net.trace(MgmtFrame(FrameKind.PROBE_RESP, self.cfg.bssid, station.mac, self.cfg.ssid))
        self.net.engine.call_in(
            WIRELESS_HOP_US, lambda: station.on_probe_resp(self), "probe_resp"
        )

    def on_auth_req(self, station: "StationNode", key: str) -> None:
        if self.net.rssi(self, station) < self.net.radio.disassoc_dbm:
            return  # request never really arrived; station times out
        ok = key == self.cfg.key
        status = "success" if ok else "refused"
        self.net.trace(MgmtFrame(FrameKind.AUTH_RESP, self.cfg.bssid, station.mac, self.cfg.ssid, status))
        self.net.engine.call_in(
            WIRELESS_HOP_US, lambda: station.on_auth_resp(self, ok), "auth_resp"
        )

    def on_assoc_req(self, station: "StationNode", prev_bssid: Optional[MacAddress]) -> None:
        if self.net.rssi(self, station) < self.net.radio.disassoc_dbm:
            return
        self.clients.add(station.mac)
        self.net.trace(MgmtFrame(FrameKind.ASSOC_RESP, self.cfg.bssid, station.mac, self.cfg.ssid, "success"))
        self.net.engine.call_in(
            WIRELESS_HOP_US, lambda: station.on_assoc_resp(self), "assoc_resp"
        )
        if prev_bssid and prev_bssid != self.cfg.bssid:
            old = self.net.ap_by_bssid(prev_bssid)
            if old is not None:
                self.net.trace(
                    MgmtFrame(FrameKind.HANDOFF_NOTICE, self.cfg.bssid, prev_bssid, self.cfg.ssid)
                )
                self.net.engine.call_in(
                    WIRED_HOP_US,
                    lambda: old.on_handoff_notice(station.mac, self),
                    "handoff_notice",
                )

    def on_disassoc(self, station: "StationNode") -> None:
        self.clients.discard(station.mac)
        self._buffers.setdefault(station.mac, [])

    def on_handoff_notice(self, mac: MacAddress, new_ap: "ApNode") -> None:
        """Flush frames buffered for a departed station through its new AP."""
        held = self._buffers.pop(mac, [])
        for desc, deliver in held[:BUFFER_FLUSH_MAX]:
            self.net.engine.call_in(
                WIRED_HOP_US,
                lambda desc=desc, deliver=deliver: new_ap.deliver_downstream(mac, desc, deliver),
                "buffer_flush",
            )

    # -- downstream data-plane delivery --------------------------------------

    def deliver_downstream(self, mac: MacAddress, desc: str, deliver: Callable[[], None]) -> None:
        """Radio-send a data-plane frame to an associated station.

        Undeliverable frames for recently departed stations are buffered
        (bounded) so a handoff notice can recover them; anything else drops.
        """
        station = self.net.station_by_mac(mac)
        if mac in self.clients and station is not None:
            if self.net.rssi(self, station) < self.net.radio.disassoc_dbm:
                return
            if self.net.data_frame_lost(station, self):
                self.net.trace_data(desc, self.cfg.bssid, mac, "lost")
                return
            self.net.trace_data(desc, self.cfg.bssid, mac)
            self.net.engine.call_in(WIRELESS_HOP_US, deliver, desc)
        elif mac in self._buffers:
            buf = self._buffers[mac]
            buf.append((desc, deliver))
            del buf[:-BUFFER_FLUSH_MAX]
        # else: unknown destination, dropped silently


class StationNode:
    """Mobile station: scanning, association handshake, roaming, link watchdog."""

    def __init__(
        self,
        net,
        mac: MacAddress,
        settings: StationSettings,
        position_fn: Callable[[float], Position],
        index: int,
    ):
        self.net = net
        self.mac = mac
        self.settings = settings
        self.position_fn = position_fn
        self.index = index
        self.conn = StationConn()
        self.dhcp = None  # DhcpClient, wired by simulation
        self._collected: list[Candidate] = []
        self._scan_pending = False
        self._scan_timer: Optional[int] = None
        self._handshake_timer: Optional[int] = None
        self._handshake_target: Optional[ApNode] = None
        self._prev_bssid: Optional[MacAddress] = None
        self._watchdog_timer: Optional[int] = None
        self._next_roam_scan_us: SimTime = 0
        self._last_beacon_us: SimTime = 0

    # -- helpers -------------------------------------------------------------

    def position(self) -> Position:
        return self.position_fn(self.net.engine.clock / 1_000_000)

    def current_ap(self) -> Optional[ApNode]:
        if self.conn.current_bssid is None:
            return None
        return self.net.ap_by_bssid(self.conn.current_bssid)

    def current_rssi(self) -> Optional[float]:
        ap = self.current_ap()
        return None if ap is None else self.net.rssi(ap, self)

    @property
    def associated(self) -> bool:
        return self.conn.state == ConnState.ASSOCIATED

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self.net.engine.call_in(self.index * 1_000, self._boot, "station_boot")

    def _boot(self) -> None:
        self.conn.state = ConnState.SCANNING
        self.begin_scan()

    # -- scanning ------------------------------------------------------------

    def begin_scan(self) -> None:
        """Broadcast a probe and collect responses for one dwell per AP channel."""
        if self._scan_pending:
            return
        if self.conn.state in (ConnState.AUTHENTICATING, ConnState.ASSOCIATING):
            return  # a handshake owns the radio until it finishes or times out
        self._scan_pending = True
        self._collected = []
        if self.conn.state != ConnState.ASSOCIATED:
            self.conn.state = ConnState.SCANNING
        self._next_roam_scan_us = self.net.engine.clock + micros(self.settings.scan_interval_s)
        self.net.trace(MgmtFrame(FrameKind.PROBE_REQ, self.mac, BROADCAST, self.settings.ssid))
        for ap in self.net.ap_nodes:
            if self.net.rssi(ap, self) >= self.net.radio.disassoc_dbm:
                self.net.engine.call_in(
                    WIRELESS_HOP_US,
                    lambda ap=ap: ap.on_probe_req(self, self.settings.ssid),
                    "probe_req",
                )
        dwell_us = micros(self.settings.scan_dwell_ms / 1000.0) * max(1, len(self.net.ap_nodes))
        self.net.engine.call_in(dwell_us, self._scan_done, "scan_done")

    def on_probe_resp(self, ap: ApNode) -> None:
        if not self._scan_pending:
            return
        rssi = self.net.rssi(ap, self)
        if rssi < self.net.radio.disassoc_dbm:
            return
        self._collected = [c for c in self._collected if c.bssid != ap.cfg.bssid]
        self._collected.append(Candidate(ap.cfg.bssid, ap.cfg.ssid, rssi))

    def _scan_done(self) -> None:
        self._scan_pending = False
        self.conn.candidates = sorted(self._collected, key=lambda c: (-c.rssi, c.bssid))
        if self.conn.state == ConnState.ASSOCIATED:
            cur = self.current_rssi()
            if cur is None:
                return
            target = pick_roam_target(
                self.conn.current_bssid, cur, self.conn.candidates, self.settings.hysteresis_db
            )
            if target is not None:
                self.net.log_event(
                    self.mac,
                    "roam_decision",
                    from_bssid=self.conn.current_bssid,
                    to_bssid=target.bssid,
                    current_rssi=cur,
                    candidate_rssi=target.rssi,
                    hysteresis_db=self.settings.hysteresis_db,
                )
                self._leave_current("roam")
                self._begin_associate(target)
        elif self.conn.state == ConnState.SCANNING:
            if self.conn.candidates:
                self._begin_associate(self.conn.candidates[0])
            else:
                self._scan_timer = self.net.engine.call_in(
                    micros(self.settings.scan_interval_s), self.begin_scan, "rescan"
                )

    # -- association handshake -------------------------------------------------

    def _begin_associate(self, cand: Candidate) -> None:
        ap = self.net.ap_by_bssid(cand.bssid)
        if ap is None:
            return
        self.conn.state = ConnState.AUTHENTICATING
        self._handshake_target = ap
        self._handshake_timer = self.net.engine.call_in(
            HANDSHAKE_TIMEOUT_US, self._handshake_timeout, "handshake_timeout"
        )
        self.net.trace(MgmtFrame(FrameKind.AUTH_REQ, self.mac, ap.cfg.bssid, self.settings.ssid))
        self.net.engine.call_in(
            WIRELESS_HOP_US, lambda: ap.on_auth_req(self, self.settings.key), "auth_req"
        )

    def on_auth_resp(self, ap: ApNode, ok: bool) -> None:
        if self.conn.state != ConnState.AUTHENTICATING or ap is not self._handshake_target:
            return
        if not ok:
            self._cancel_handshake()
            self.conn.candidates = [c for c in self.conn.candidates if c.bssid != ap.cfg.bssid]
            self.net.log_event(self.mac, "auth_refused", bssid=ap.cfg.bssid)
            if self.conn.candidates:
                self._begin_associate(self.conn.candidates[0])
            else:
                self.conn.state = ConnState.SCANNING
                self._scan_timer = self.net.engine.call_in(
                    micros(self.settings.scan_interval_s), self.begin_scan, "rescan"
                )
            return
        self.conn.state = ConnState.ASSOCIATING
        self.net.trace(MgmtFrame(FrameKind.ASSOC_REQ, self.mac, ap.cfg.bssid, self.settings.ssid))
        self.net.engine.call_in(
            WIRELESS_HOP_US, lambda: ap.on_assoc_req(self, self._prev_bssid), "assoc_req"
        )

    def on_assoc_resp(self, ap: ApNode) -> None:
        if self.conn.state != ConnState.ASSOCIATING or ap is not self._handshake_target:
            return
        self._cancel_handshake()
        roamed = self._prev_bssid is not None and self._prev_bssid != ap.cfg.bssid
        self._prev_bssid = None
        self.conn.state = ConnState.ASSOCIATED
        self.conn.current_bssid = ap.cfg.bssid
        self.conn.missed_beacons = 0
        self._last_beacon_us = self.net.engine.clock
        self._start_watchdog(ap)
        self.net.on_station_associated(self, ap, roamed)

    def _handshake_timeout(self) -> None:
        self._handshake_timer = None
        if self.conn.state not in (ConnState.AUTHENTICATING, ConnState.ASSOCIATING):
            return
        self._handshake_target = None
        self.conn.state = ConnState.SCANNING
        self.begin_scan()

    def _cancel_handshake(self) -> None:
        if self._handshake_timer is not None:
            self.net.engine.cancel(self._handshake_timer)
            self._handshake_timer = None

    # -- link maintenance --------------------------------------------------------

    def on_beacon(self, ap: ApNode) -> None:
        if self.associated and ap.cfg.bssid == self.conn.current_bssid:
            self._last_beacon_us = self.net.engine.clock
            self.conn.missed_beacons = 0

    def _start_watchdog(self, ap: ApNode) -> None:
        self._stop_watchdog()
        interval = micros(ap.cfg.beacon_interval_ms / 1000.0)
        self._watchdog_timer = self.net.engine.call_in(interval, self._watchdog, "watchdog")

    def _stop_watchdog(self) -> None:
        if self._watchdog_timer is not None:
            self.net.engine.cancel(self._watchdog_timer)
            self._watchdog_timer = None

    def _watchdog(self) -> None:
        self._watchdog_timer = None
        if not self.associated:
            return
        ap = self.current_ap()
        rssi = self.net.rssi(ap, self)
        interval_us = micros(ap.cfg.beacon_interval_ms / 1000.0)
        if rssi < self.net.radio.disassoc_dbm:
            self._leave_current("signal_lost")
            self.begin_scan()
            return
        self.conn.missed_beacons = int(
            (self.net.engine.clock - self._last_beacon_us) // interval_us
        )
        if self.conn.missed_beacons >= self.settings.missed_beacon_limit:
            self._leave_current("beacon_loss")
            self.begin_scan()
            return
        if (
            rssi < self.settings.roam_scan_dbm
            and not self._scan_pending
            and self.net.engine.clock >= self._next_roam_scan_us
        ):
            self.begin_scan()
        self._watchdog_timer = self.net.engine.call_in(interval_us, self._watchdog, "watchdog")

    def _leave_current(self, reason: str) -> None:
        """Break the current association (send Disassoc, stop service)."""
        ap = self.current_ap()
        if ap is not None:
            self.net.trace(MgmtFrame(FrameKind.DISASSOC, self.mac, ap.cfg.bssid, self.settings.ssid, reason))
            ap.on_disassoc(self)
            self._prev_bssid = ap.cfg.bssid
        self.conn.current_bssid = None
        self.conn.state = ConnState.SCANNING
        self._stop_watchdog()
        self._cancel_handshake()
        self.net.on_station_disassociated(self, reason)
