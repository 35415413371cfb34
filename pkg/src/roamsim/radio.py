"""Geometry to link quality: log-distance path loss, coverage regimes, loss rate.

Everything here is a pure function over value types and safe to call from
any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


@dataclass(frozen=True)
class Position:
    x: float
    y: float


def distance_m(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


class CoverageRegime(str, Enum):
    IN_RANGE = "in_range"
    FAR_EDGE = "far_edge"
    OUT_OF_RANGE = "out_of_range"


@dataclass
class RadioModel:
    """Path-loss constants plus the thresholds splitting coverage into regimes.

    Defaults give roughly a 100 m usable radius around an access point,
    consistent with units mounted on neighbouring buildings. The thresholds
    and loss parameters are calibration knobs surfaced in the scenario file,
    not constants of the simulator.
    """

    tx_power_dbm: float = 20.0
    pl0_db: float = 40.0          # path loss at the reference distance
    ref_dist_m: float = 1.0
    exponent: float = 3.0
    in_range_dbm: float = -65.0
    far_edge_dbm: float = -80.0
    disassoc_dbm: float = -85.0   # below this no frame is received at all
    per_max: float = 0.65         # frame error rate at the far-edge boundary
    overhead: float = 0.88        # MAC/protocol efficiency for goodput

    def validate(self) -> None:
        if not (self.disassoc_dbm < self.far_edge_dbm < self.in_range_dbm):
            raise ValueError(
                "thresholds must satisfy disassoc < far_edge < in_range "
                f"(got {self.disassoc_dbm}, {self.far_edge_dbm}, {self.in_range_dbm})"
            )
        if not 0.0 <= self.per_max < 1.0:
            raise ValueError(f"per_max must be in [0, 1), got {self.per_max}")
        if not 0.0 < self.overhead <= 1.0:
            raise ValueError(f"overhead must be in (0, 1], got {self.overhead}")
        if self.exponent <= 0.0:
            raise ValueError(f"exponent must be positive, got {self.exponent}")
        if self.ref_dist_m <= 0.0:
            raise ValueError(f"ref_dist_m must be positive, got {self.ref_dist_m}")


def rssi_at(model: RadioModel, ap_pos: Position, st_pos: Position) -> float:
    """Received signal strength (dBm) at ``st_pos`` from an AP at ``ap_pos``.

    Log-distance path loss; distances are clamped to the reference distance
    to avoid the log singularity at d=0.
    """
    d = max(distance_m(ap_pos, st_pos), model.ref_dist_m)
    loss = model.pl0_db + 10.0 * model.exponent * math.log10(d / model.ref_dist_m)
    return model.tx_power_dbm - loss


def regime(model: RadioModel, rssi: float) -> CoverageRegime:
    if rssi >= model.in_range_dbm:
        return CoverageRegime.IN_RANGE
    if rssi >= model.far_edge_dbm:
        return CoverageRegime.FAR_EDGE
    return CoverageRegime.OUT_OF_RANGE


def per(model: RadioModel, rssi: float) -> float:
    """Frame loss probability for data traffic at a given signal level.

    Zero while in range, then a linear ramp to ``per_max`` at the far-edge
    boundary and a second ramp to certain loss at the disassociation
    threshold.
    """
    if rssi >= model.in_range_dbm:
        return 0.0
    if rssi >= model.far_edge_dbm:
        span = model.in_range_dbm - model.far_edge_dbm
        return model.per_max * (model.in_range_dbm - rssi) / span
    if rssi >= model.disassoc_dbm:
        span = model.far_edge_dbm - model.disassoc_dbm
        frac = (model.far_edge_dbm - rssi) / span
        return model.per_max + (1.0 - model.per_max) * frac
    return 1.0


def effective_capacity(model: RadioModel, wan_kbps: float, rssi: float) -> float:
    """Usable downlink capacity in kbps given the uplink rate and signal."""
    if wan_kbps < 0:
        raise ValueError(f"wan_kbps must be non-negative, got {wan_kbps}")
    return wan_kbps * (1.0 - per(model, rssi))
