import math

import pytest
from fastapi.testclient import TestClient

from app.core.config import Settings, get_settings
from app.main import app


@pytest.fixture
def client():
    app.dependency_overrides[get_settings] = lambda: Settings(API_MAX_ATOMS=500, SCAN_THREADS=2)
    with TestClient(app) as c:
        yield c
    app.dependency_overrides.clear()


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


class TestAnalytics:
    def test_t_res(self, client):
        r = client.get("/api/analytics/t-res", params={"k": 4.2, "epsilon": 0.0104})
        assert r.status_code == 200
        body = r.json()
        assert body["t_res"] == pytest.approx(4.785, abs=0.01)
        assert body["x_per_kick"] == pytest.approx(1 / body["t_res"])

    def test_t_res_on_resonance(self, client):
        r = client.get("/api/analytics/t-res", params={"k": 4.2, "epsilon": 0.0})
        assert r.status_code == 422
        assert r.json()["detail"]["error"] == "invalid-parameter"

    def test_side_peak(self, client):
        r = client.get("/api/analytics/side-peak", params={"t": 16, "k": 4.1})
        assert r.status_code == 200
        body = r.json()
        assert body["abs_epsilon"] == pytest.approx(0.0106707, rel=1e-5)
        assert body["kbar_right"] - body["kbar_left"] == pytest.approx(2 * body["abs_epsilon"])

    def test_side_peak_rejects_zero_kicks(self, client):
        assert client.get("/api/analytics/side-peak", params={"t": 0, "k": 4.1}).status_code == 422

    def test_g_function(self, client):
        r = client.post("/api/analytics/g-function",
                        json={"x": [0.0, 1.0], "n_theta": 8, "nodes_per_panel": 4, "full_form": True})
        assert r.status_code == 200
        body = r.json()
        assert body["g"][0] == pytest.approx(0.0, abs=1e-12)
        assert body["ratio"][0] is None
        assert body["ratio"][1] > 0

    def test_g_function_negative_x(self, client):
        r = client.post("/api/analytics/g-function", json={"x": [-1.0], "n_theta": 8, "nodes_per_panel": 4})
        assert r.status_code == 422


class TestSimulations:
    def test_energy_on_resonance(self, client):
        r = client.post("/api/simulations/energy", json={
            "engine": "eclassical", "kbar": 2 * math.pi, "k": 4.2, "kicks": 6,
            "ensemble": {"atom_count": 50, "seed": 3, "beta_law": {"kind": "point", "value": 0.5}},
        })
        assert r.status_code == 200
        body = r.json()
        assert body["epsilon"] == 0.0 and body["ell"] == 1
        assert body["mean_energy"] == pytest.approx(4.2 ** 2 * 36 / 4)
        assert body["ratio"] == pytest.approx(6.0)

    def test_energy_quantum(self, client):
        r = client.post("/api/simulations/energy", json={
            "engine": "quantum", "kbar": 6.3, "k": 4.2, "kicks": 4, "ensemble": {"atom_count": 20, "seed": 3},
        })
        assert r.status_code == 200
        assert r.json()["mean_energy"] > 0

    def test_energy_over_budget(self, client):
        r = client.post("/api/simulations/energy", json={"kbar": 6.3, "kicks": 4, "ensemble": {"atom_count": 501}})
        assert r.status_code == 422

    def test_energy_kbar_below_pi(self, client):
        assert client.post("/api/simulations/energy", json={"kbar": 3.0, "kicks": 4}).status_code == 422

    def test_scan(self, client):
        r = client.post("/api/simulations/scan", json={
            "engine": "both", "k": 4.2, "kicks": [3], "eclassical_atoms": 100,
            "ensemble": {"atom_count": 10, "seed": 4}, "kbar_grid": [6.2, 6.3],
        })
        assert r.status_code == 200
        body = r.json()
        assert len(body["config_hash"]) == 64
        assert len(body["rows"]) == 4
        assert {row["engine"] for row in body["rows"]} == {"quantum", "eclassical"}

    def test_scan_invalid_grid(self, client):
        r = client.post("/api/simulations/scan", json={"kbar_grid": [6.3, 6.2], "eclassical_atoms": 100})
        assert r.status_code == 422
