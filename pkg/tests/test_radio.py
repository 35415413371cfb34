import math
import random

import pytest

from roamsim.radio import (
    CoverageRegime,
    Position,
    RadioModel,
    effective_capacity,
    per,
    regime,
    rssi_at,
)

ORIGIN = Position(0.0, 0.0)


def at(d: float) -> Position:
    return Position(d, 0.0)


def test_rssi_at_reference_distance():
    # At the reference distance the log term vanishes: 20 - 40 = -20.
    assert rssi_at(RadioModel(), ORIGIN, at(1.0)) == pytest.approx(-20.0)


def test_rssi_hand_evaluated_points():
    m = RadioModel()
    # 20 - 40 - 10*3*log10(10) and 20 - 40 - 10*3*log10(100)
    assert rssi_at(m, ORIGIN, at(10.0)) == pytest.approx(-50.0)
    assert rssi_at(m, ORIGIN, at(100.0)) == pytest.approx(-80.0)


def test_rssi_clamps_below_reference_distance():
    m = RadioModel()
    assert rssi_at(m, ORIGIN, at(0.0)) == rssi_at(m, ORIGIN, at(1.0))
    assert rssi_at(m, ORIGIN, at(0.5)) == rssi_at(m, ORIGIN, at(1.0))


def test_regime_thresholds():
    m = RadioModel()
    assert regime(m, -60.0) == CoverageRegime.IN_RANGE
    assert regime(m, -65.0) == CoverageRegime.IN_RANGE
    assert regime(m, -80.0) == CoverageRegime.FAR_EDGE  # boundary inclusive
    assert regime(m, -80.1) == CoverageRegime.OUT_OF_RANGE


def test_per_points():
    m = RadioModel()
    assert per(m, -60.0) == 0.0
    assert per(m, -65.0) == 0.0
    assert per(m, -80.0) == pytest.approx(0.65)
    assert per(m, -72.5) == pytest.approx(0.325)  # midpoint of the first ramp
    assert per(m, -85.0) == pytest.approx(1.0)
    assert per(m, -99.0) == 1.0


def test_effective_capacity_points():
    m = RadioModel()
    assert effective_capacity(m, 368.5, -60.0) == pytest.approx(368.5)
    assert effective_capacity(m, 368.5, -80.0) == pytest.approx(368.5 * 0.35)
    assert effective_capacity(m, 368.5, -90.0) == 0.0


def test_effective_capacity_rejects_negative_rate():
    with pytest.raises(ValueError):
        effective_capacity(RadioModel(), -1.0, -60.0)


def test_rssi_monotone_in_distance():
    m = RadioModel()
    rnd = random.Random(7)
    for _ in range(2000):
        d1 = rnd.uniform(1.0, 500.0)
        d2 = rnd.uniform(1.0, 500.0)
        if d1 == d2:
            continue
        lo, hi = sorted((d1, d2))
        assert rssi_at(m, ORIGIN, at(lo)) > rssi_at(m, ORIGIN, at(hi))


def test_per_monotone_and_capacity_bounded():
    m = RadioModel()
    rnd = random.Random(8)
    for _ in range(2000):
        r1, r2 = sorted((rnd.uniform(-110.0, -40.0), rnd.uniform(-110.0, -40.0)))
        assert per(m, r1) >= per(m, r2)
        c1 = effective_capacity(m, 368.5, r1)
        c2 = effective_capacity(m, 368.5, r2)
        assert c1 <= c2 <= 368.5


def test_regime_ordering_matches_capacity_ordering():
    m = RadioModel()
    wans = 368.5
    c_in = effective_capacity(m, wans, -60.0)
    c_far = effective_capacity(m, wans, -78.0)
    c_out = effective_capacity(m, wans, -90.0)
    assert c_in >= c_far >= c_out == 0.0


def test_model_validation():
    RadioModel().validate()
    with pytest.raises(ValueError):
        RadioModel(in_range_dbm=-80.0, far_edge_dbm=-65.0).validate()
    with pytest.raises(ValueError):
        RadioModel(per_max=1.0).validate()
    with pytest.raises(ValueError):
        RadioModel(overhead=0.0).validate()
    with pytest.raises(ValueError):
        RadioModel(exponent=0.0).validate()


def test_rssi_uses_euclidean_distance():
    m = RadioModel()
    assert rssi_at(m, Position(3.0, 0.0), Position(0.0, 4.0)) == pytest.approx(
        m.tx_power_dbm - m.pl0_db - 10 * m.exponent * math.log10(5.0)
    )
