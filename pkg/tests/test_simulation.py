from roamsim.scenario import parse_scenario
from roamsim.simulation import run_scenario


def test_roaming_run_reaches_second_ap_with_same_ip(roaming_result):
    final = roaming_result.stations[0]
    assert final.bssid == "02:00:00:00:01:02"
    assert final.ip == "192.168.137.100"
    assert final.ips_held == ["192.168.137.100"]


def test_roaming_run_produces_handoff_report(roaming_result):
    h = roaming_result.handoff
    assert h is not None
    assert h.outage_end_s > h.outage_start_s
    assert h.rto_count > 0
    assert h.throughput_recovery_s is not None


def test_sample_per_second_for_whole_duration(roaming_result):
    samples = roaming_result.primary_log.samples
    assert len(samples) == 400
    assert [s.t_s for s in samples] == [float(t) for t in range(1, 401)]


def test_throughput_bounded_by_bandwidth(roaming_result):
    overhead = 0.88
    for s in roaming_result.primary_log.samples:
        assert s.throughput_kBps <= s.bandwidth_kbps * overhead / 8.0 + 1e-9


def test_no_service_means_no_traffic(roaming_result):
    for s in roaming_result.primary_log.samples:
        if s.bssid is None or s.ip is None:
            assert s.bandwidth_kbps == 0.0
            assert s.throughput_kBps == 0.0
            assert s.rto == 1


def test_no_roaming_run_disconnects_for_good(no_roaming_result):
    final = no_roaming_result.stations[0]
    assert final.bssid is None and final.ip is None
    assert no_roaming_result.handoff is None
    samples = no_roaming_result.primary_log.samples
    dead_from = next(i for i, s in enumerate(samples) if s.bssid is None and s.t_s > 100)
    tail = samples[dead_from:]
    assert all(s.rto == 1 and s.throughput_kBps == 0.0 for s in tail)


def test_same_seed_reproduces_byte_identical_outputs(roaming_text):
    a = run_scenario(parse_scenario(roaming_text), 5)
    b = run_scenario(parse_scenario(roaming_text), 5)
    assert a.csv == b.csv
    assert a.frames == b.frames
    assert a.leases == b.leases
    assert a.summary_text == b.summary_text


def test_different_seeds_diverge(roaming_text):
    a = run_scenario(parse_scenario(roaming_text), 5)
    b = run_scenario(parse_scenario(roaming_text), 6)
    assert a.csv != b.csv


def test_seed_argument_overrides_file_seed(roaming_text):
    cfg = parse_scenario(roaming_text)
    assert run_scenario(cfg, 5).seed == 5
    assert run_scenario(parse_scenario(roaming_text)).seed == 42


MULTI = """
[router]

[radio]

[ap one]
bssid = 02:00:00:00:01:01
ssid = Roaming
key = qwerty123
position = 0,0

[station a]
mac = 02:00:00:00:aa:01
ssid = Roaming
key = qwerty123
path = 3,0@0

[station b]
mac = 02:00:00:00:aa:02
ssid = Roaming
key = qwerty123
path = 5,0@0

[station c]
mac = 02:00:00:00:aa:03
ssid = Roaming
key = qwerty123
path = 7,0@0

[sim]
duration_s = 8
seed = 1
"""


def test_multiple_stations_get_distinct_addresses():
    res = run_scenario(parse_scenario(MULTI))
    ips = sorted(s.ip for s in res.stations)
    assert ips == ["192.168.137.100", "192.168.137.101", "192.168.137.102"]
    assert len(res.logs) == 3
    # final lease table is the mac<->ip map, ordered by address
    lines = res.leases.splitlines()
    assert len(lines) == 3
    assert lines[0].split(" ")[1] == "192.168.137.100"


def test_engine_event_counts_reported(roaming_result):
    assert roaming_result.events_processed > 10_000


def test_simulation_instance_runs_once(roaming_text):
    from roamsim.simulation import Simulation
    import pytest

    sim = Simulation(parse_scenario(roaming_text))
    sim.run()
    with pytest.raises(RuntimeError):
        sim.run()


def test_in_range_ping_beats_far_edge_for_every_seed(no_roaming_text):
    import statistics

    cfg_text = no_roaming_text
    for seed in range(1, 11):
        res = run_scenario(parse_scenario(cfg_text), seed)
        samples = res.primary_log.samples
        in_pings = [s.rtt_ms for s in samples if s.regime == "in_range" and s.rtt_ms is not None]
        far_pings = [s.rtt_ms for s in samples if s.regime == "far_edge" and s.rtt_ms is not None]
        assert statistics.mean(in_pings) < statistics.mean(far_pings), f"seed {seed}"


def test_post_roam_throughput_returns_to_steady_state(roaming_result):
    import statistics

    h = roaming_result.handoff
    samples = roaming_result.primary_log.samples
    pre = [s.throughput_kBps for s in samples if s.regime == "in_range" and s.t_s <= h.outage_start_s]
    post = [s.throughput_kBps for s in samples if s.regime == "in_range" and s.t_s >= h.outage_end_s]
    assert pre and post
    ratio = statistics.mean(post) / statistics.mean(pre)
    assert 0.9 <= ratio <= 1.1
