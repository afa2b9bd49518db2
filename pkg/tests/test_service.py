import pytest
from fastapi.testclient import TestClient

from hessian2.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_tau_endpoint(client):
    resp = client.post("/tau", json={"f0": 0.0})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["values"] == [2, 2, -1]
    assert doc["cone"] == "P2"
    assert doc["sigma"] == [3, 0, -4]

    resp = client.post("/tau", json={"f0": 3.0, "mode": "convex"})
    assert resp.json()["values"] == [1, 1, 1]


def test_tau_endpoint_rejects_bad_mode(client):
    resp = client.post("/tau", json={"f0": -1.0, "mode": "convex"})
    assert resp.status_code == 400
    assert "requires f0 > 0" in resp.json()["detail"]


def test_solve_endpoint_small(client):
    resp = client.post("/solve", json={"f": "0", "n": 17})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["outcome"] == "Converged"
    assert doc["exit_code"] == 0
    assert doc["report"]["convexity"] == "one_convex_not_convex"
    assert doc["run"]["ellipticity_pass"] is True
    assert doc["history"][0]["g_sup"] == 0.0
    assert doc["config"]["n"] == 17
    assert doc["w_field"] is None  # emit_fields defaults off


def test_solve_endpoint_parse_error(client):
    resp = client.post("/solve", json={"f": "sin(y1", "n": 17})
    assert resp.status_code == 400
    assert "expected" in resp.json()["detail"]


def test_solve_endpoint_validation_error(client):
    # pydantic range validation rejects before any work happens
    resp = client.post("/solve", json={"f": "0", "n": 17, "eps_shrink": 1.5})
    assert resp.status_code == 422


def test_solve_endpoint_config_error(client):
    resp = client.post("/solve", json={"f": "0", "n": 16})
    assert resp.status_code == 400
    assert "odd" in resp.json()["detail"]


def test_sweep_endpoint(client):
    resp = client.post(
        "/sweep", json={"f": "y1", "n": 17, "eps_list": [0.1, 0.05, 0.025]}
    )
    assert resp.status_code == 200
    rows = resp.json()["rows"]
    assert [r["eps"] for r in rows] == [0.1, 0.05, 0.025]
    g0 = [r["g0_sup"] for r in rows]
    assert g0[1] / g0[0] == pytest.approx(0.5, abs=1e-12)
    assert g0[2] / g0[1] == pytest.approx(0.5, abs=1e-12)


def test_verify_endpoint_roundtrip(client):
    solve = client.post(
        "/solve", json={"f": "y1", "n": 17, "emit_fields": True}
    ).json()
    assert solve["outcome"] == "Converged"
    assert solve["w_field"]
    assert solve["u_samples"]
    req = {
        "f": "y1",
        "tau_values": solve["run"]["tau"]["values"],
        "eps": solve["run"]["eps"],
        "n": 17,
        "bandwidth": 1.5,
        "sample_n": 9,
        "w_field": solve["w_field"],
    }
    resp = client.post("/verify", json=req)
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["verification_pass"] is True
    assert doc["report"]["convexity"] == solve["report"]["convexity"]
    # transported fields reproduce the in-process verification report
    assert doc["report"]["residual_sup"] == pytest.approx(
        solve["report"]["residual_sup"], rel=1e-12, abs=1e-15
    )


def test_solve_response_history_matches_floats(client):
    doc = client.post("/solve", json={"f": "y1", "n": 17}).json()
    sups = [row["g_sup"] for row in doc["history"]]
    assert all(b < a for a, b in zip(sups, sups[1:]))
    assert doc["run"]["g0_sup"] == sups[0]
