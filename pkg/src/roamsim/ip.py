"""Router with WAN uplink and DHCP server, plus the station-side DHCP client.

The router is the only address authority on the LAN. Access points relay
client broadcasts to it (see ``wifi.DhcpMode``) and never allocate
addresses themselves, which is what lets a station keep one IP while it
moves between APs: an unexpired lease is always re-offered to the same MAC.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .engine import Engine, SimTime, micros
from .wifi import ApConfig, DhcpMode, MacAddress


class DhcpKind(str, Enum):
    DISCOVER = "dhcp_discover"
    OFFER = "dhcp_offer"
    REQUEST = "dhcp_request"
    ACK = "dhcp_ack"
    NAK = "dhcp_nak"


@dataclass(frozen=True)
class DhcpMessage:
    kind: DhcpKind
    client_mac: MacAddress
    ip: Optional[str] = None           # offered / requested address
    relay_ap: Optional[MacAddress] = None  # set exactly when relayed by an AP


@dataclass
class DhcpLease:
    mac: MacAddress
    ip: str
    granted_at_us: SimTime
    expires_at_us: SimTime

    def active(self, now_us: SimTime) -> bool:
        return now_us < self.expires_at_us


@dataclass
class RouterConfig:
    """Router LAN addressing, DHCP pool, and the abstracted WAN uplink."""

    lan_ip: str = "192.168.137.1"
    netmask: str = "255.255.255.0"
    pool_start: str = "192.168.137.100"
    pool_end: str = "192.168.137.199"
    lease_time_s: float = 3600.0
    wan_kbps: float = 368.5
    wan_rtt_ms: float = 150.0

    def validate(self) -> None:
        lan = ipaddress.IPv4Address(self.lan_ip)
        net = ipaddress.IPv4Network(f"{self.lan_ip}/{self.netmask}", strict=False)
        start = ipaddress.IPv4Address(self.pool_start)
        end = ipaddress.IPv4Address(self.pool_end)
        if start > end:
            raise ValueError(f"pool_start {start} above pool_end {end}")
        if start not in net or end not in net:
            raise ValueError(f"pool {start}-{end} outside subnet {net}")
        if start <= lan <= end:
            raise ValueError(f"router address {lan} must sit outside the pool")
        if self.lease_time_s <= 0:
            raise ValueError("lease_time_s must be positive")
        if self.wan_kbps < 0 or self.wan_rtt_ms < 0:
            raise ValueError("WAN parameters must be non-negative")


class DhcpServer:
    """Lease book-keeping for the router. Purely synchronous; the caller
    supplies the current virtual time on every message."""

    def __init__(self, cfg: RouterConfig):
        cfg.validate()
        self.cfg = cfg
        self._pool_start = int(ipaddress.IPv4Address(cfg.pool_start))
        self._pool_end = int(ipaddress.IPv4Address(cfg.pool_end))
        self._leases: dict[MacAddress, DhcpLease] = {}

    # -- queries -------------------------------------------------------------

    def lease_for(self, mac: MacAddress, now_us: SimTime) -> Optional[DhcpLease]:
        lease = self._leases.get(mac)
        if lease is not None and lease.active(now_us):
            return lease
        return None

    def active_leases(self, now_us: SimTime) -> list[DhcpLease]:
        live = [l for l in self._leases.values() if l.active(now_us)]
        return sorted(live, key=lambda l: int(ipaddress.IPv4Address(l.ip)))

    def dump(self, now_us: SimTime) -> str:
        """Lease table, one ``mac ip granted_s expires_s`` line per lease, by ip."""
        lines = [
            f"{l.mac} {l.ip} {l.granted_at_us / 1e6:.3f} {l.expires_at_us / 1e6:.3f}"
            for l in self.active_leases(now_us)
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def _owner_of(self, ip: str, now_us: SimTime) -> Optional[DhcpLease]:
        for lease in self._leases.values():
            if lease.ip == ip and lease.active(now_us):
                return lease
        return None

    def _lowest_free(self, now_us: SimTime) -> Optional[str]:
        taken = {l.ip for l in self._leases.values() if l.active(now_us)}
        for raw in range(self._pool_start, self._pool_end + 1):
            ip = str(ipaddress.IPv4Address(raw))
            if ip not in taken:
                return ip
        return None

    def _in_pool(self, ip: str) -> bool:
        try:
            raw = int(ipaddress.IPv4Address(ip))
        except ipaddress.AddressValueError:
            return False
        return self._pool_start <= raw <= self._pool_end

    # -- protocol ------------------------------------------------------------

    def handle(self, msg: DhcpMessage, now_us: SimTime) -> Optional[DhcpMessage]:
        """Answer one client message; None when the message is not for a server."""
        if msg.kind == DhcpKind.DISCOVER:
            lease = self.lease_for(msg.client_mac, now_us)
            ip = lease.ip if lease is not None else self._lowest_free(now_us)
            if ip is None:
                return DhcpMessage(DhcpKind.NAK, msg.client_mac, relay_ap=msg.relay_ap)
            return DhcpMessage(DhcpKind.OFFER, msg.client_mac, ip, msg.relay_ap)
        if msg.kind == DhcpKind.REQUEST:
            ip = msg.ip
            if ip is None or not self._in_pool(ip):
                return DhcpMessage(DhcpKind.NAK, msg.client_mac, relay_ap=msg.relay_ap)
            owner = self._owner_of(ip, now_us)
            if owner is not None and owner.mac != msg.client_mac:
                return DhcpMessage(DhcpKind.NAK, msg.client_mac, relay_ap=msg.relay_ap)
            self._leases[msg.client_mac] = DhcpLease(
                msg.client_mac, ip, now_us, now_us + micros(self.cfg.lease_time_s)
            )
            return DhcpMessage(DhcpKind.ACK, msg.client_mac, ip, msg.relay_ap)
        return None


def forward(ap: ApConfig, msg: DhcpMessage) -> Optional[DhcpMessage]:
    """Relay a client broadcast toward the router, forwarder-style.

    Returns the unicast message stamped with the relaying AP's BSSID, or
    None when the AP has its DHCP role disabled (the message just dies,
    which surfaces to the station as configuration failure).
    """
    if ap.dhcp_mode != DhcpMode.FORWARDER:
        return None
    return DhcpMessage(msg.kind, msg.client_mac, msg.ip, relay_ap=ap.bssid)


class ClientState(str, Enum):
    IDLE = "idle"
    SELECTING = "selecting"     # discover sent, waiting for an offer
    REQUESTING = "requesting"   # request sent, waiting for the ack
    BOUND = "bound"
    FAILED = "failed"


class DhcpClient:
    """Station-side lease acquisition over a lossy link.

    A fresh association runs the full discover/offer/request/ack exchange;
    after a roam the client remembers its lease and goes straight to a
    re-request, which normally costs a single round trip. Every phase is
    retransmitted on a timeout, and after ``max_tries`` sends the client
    gives up, reports failure, and restarts from scratch a moment later.
    """

    def __init__(
        self,
        engine: Engine,
        mac: MacAddress,
        send_fn: Callable[[DhcpMessage], None],
        on_bound: Callable[[str], None],
        on_unbound: Callable[[], None],
        on_failure: Optional[Callable[[], None]] = None,
        timeout_s: float = 2.0,
        max_tries: int = 3,
        restart_delay_s: float = 0.5,
    ):
        self.engine = engine
        self.mac = mac
        self.send_fn = send_fn
        self.on_bound = on_bound
        self.on_unbound = on_unbound
        self.on_failure = on_failure
        self.timeout_us = micros(timeout_s)
        self.max_tries = max_tries
        self.restart_delay_us = micros(restart_delay_s)
        self.state = ClientState.IDLE
        self.ip: Optional[str] = None
        self.remembered_ip: Optional[str] = None
        self._request_ip: Optional[str] = None
        self._tries = 0
        self._timer: Optional[int] = None
        self._link_up = False

    # -- link events -----------------------------------------------------------

    def on_associated(self) -> None:
        self._link_up = True
        self._cancel_timer()
        if self.remembered_ip is not None:
            self._enter_requesting(self.remembered_ip)
        else:
            self._enter_selecting()

    def on_link_down(self) -> None:
        self._link_up = False
        self._cancel_timer()
        if self.ip is not None:
            self.ip = None
            self.on_unbound()
        if self.state != ClientState.FAILED:
            self.state = ClientState.IDLE

    # -- phases ------------------------------------------------------------------

    def _enter_selecting(self) -> None:
        self.state = ClientState.SELECTING
        self._tries = 0
        self._send_current()

    def _enter_requesting(self, ip: str) -> None:
        self.state = ClientState.REQUESTING
        self._request_ip = ip
        self._tries = 0
        self._send_current()

    def _send_current(self) -> None:
        self._tries += 1
        if self.state == ClientState.SELECTING:
            self.send_fn(DhcpMessage(DhcpKind.DISCOVER, self.mac))
        elif self.state == ClientState.REQUESTING:
            self.send_fn(DhcpMessage(DhcpKind.REQUEST, self.mac, self._request_ip))
        else:
            return
        self._timer = self.engine.call_in(self.timeout_us, self._on_timeout, "dhcp_timeout")

    def _on_timeout(self) -> None:
        self._timer = None
        if self.state not in (ClientState.SELECTING, ClientState.REQUESTING):
            return
        if self._tries >= self.max_tries:
            self.state = ClientState.FAILED
            if self.on_failure is not None:
                self.on_failure()
            self.engine.call_in(self.restart_delay_us, self._restart, "dhcp_restart")
            return
        self._send_current()

    def _restart(self) -> None:
        if self.state != ClientState.FAILED or not self._link_up:
            return
        if self.remembered_ip is not None:
            self._enter_requesting(self.remembered_ip)
        else:
            self._enter_selecting()

    # -- server messages ------------------------------------------------------------

    def on_message(self, msg: DhcpMessage) -> None:
        if msg.client_mac != self.mac:
            return
        if msg.kind == DhcpKind.OFFER and self.state == ClientState.SELECTING:
            self._cancel_timer()
            self._enter_requesting(msg.ip)
        elif msg.kind == DhcpKind.ACK and self.state == ClientState.REQUESTING:
            self._cancel_timer()
            self.state = ClientState.BOUND
            self.ip = msg.ip
            self.remembered_ip = msg.ip
            self.on_bound(msg.ip)
        elif msg.kind == DhcpKind.NAK and self.state in (
            ClientState.SELECTING,
            ClientState.REQUESTING,
        ):
            # Our remembered address is stale or the pool rejected us: forget
            # it and restart discovery from the top.
            self._cancel_timer()
            self.remembered_ip = None
            self._enter_selecting()

    def _cancel_timer(self) -> None:
        if self._timer is not None:
            self.engine.cancel(self._timer)
            self._timer = None
