import pytest
from fastapi.testclient import TestClient

from roamsim.service import SimulateRequest, create_app, run_request


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


def test_simulate_returns_report_and_artifacts(client, roaming_text):
    reply = client.post(
        "/simulate",
        json={"scenario": roaming_text, "include_csv": True, "include_leases": True},
    )
    assert reply.status_code == 200
    body = reply.json()
    assert body["seed"] == 42
    assert body["handoff"]["rto_count"] > 0
    assert body["stations"][0]["ip"] == "192.168.137.100"
    assert body["csv"].startswith("t_s,bssid,ip,regime")
    assert body["leases"].strip()
    assert body["frames"] is None  # not requested
    names = [c["name"] for c in body["columns"]]
    assert names == ["in_range", "far_edge", "roam_area", "post_roam"]


def test_simulate_seed_override(client, roaming_text):
    body = client.post("/simulate", json={"scenario": roaming_text, "seed": 7}).json()
    assert body["seed"] == 7


def test_simulate_rejects_bad_scenario_with_line(client):
    reply = client.post("/simulate", json={"scenario": "[sim]\nbogus = 1\n"})
    assert reply.status_code == 400
    detail = reply.json()["detail"]
    assert detail["line"] == 2
    assert "bogus" in detail["message"]


def test_simulate_rejects_malformed_body(client):
    assert client.post("/simulate", json={}).status_code == 422


def test_validate_endpoint(client, roaming_text):
    ok = client.post("/validate", json={"scenario": roaming_text}).json()
    assert ok == {"valid": True, "line": None, "message": None}
    bad = client.post("/validate", json={"scenario": "x = 1\n"}).json()
    assert bad["valid"] is False and bad["line"] == 1


def test_in_process_request_path_matches_http(client, roaming_text):
    local = run_request(SimulateRequest(scenario=roaming_text, include_csv=True))
    remote = client.post(
        "/simulate", json={"scenario": roaming_text, "include_csv": True}
    ).json()
    assert local.csv == remote["csv"]
    assert local.summary_text == remote["summary_text"]


def test_concurrent_requests_are_independent(client, roaming_text, no_roaming_text):
    import concurrent.futures

    def call(text):
        return client.post("/simulate", json={"scenario": text}).json()

    with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
        futures = [pool.submit(call, t) for t in (roaming_text, no_roaming_text) * 2]
        bodies = [f.result() for f in futures]
    assert bodies[0] == bodies[2]
    assert bodies[1] == bodies[3]
    assert bodies[0]["handoff"] is not None
    assert bodies[1]["handoff"] is None
