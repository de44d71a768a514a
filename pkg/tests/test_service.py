import numpy as np
import pytest
from fastapi.testclient import TestClient

from pqelab.service import app

client = TestClient(app)


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert "scaling" in body["experiments"]


def test_h2_curve_endpoint_exact():
    payload = {"config": {
        "model": {"kind": "h2", "geometries": [0.75, 6.0]},
        "backend": {"kind": "exact"},
    }}
    resp = client.post("/experiments/h2-curve", json=payload)
    assert resp.status_code == 200
    record = resp.json()
    assert record["experiment"] == "h2-curve"
    assert len(record["units"]) == 2
    assert record["summary"]["max_abs_mean_error"] < 1e-8


def test_tfim_matrix_endpoint_exact():
    payload = {"config": {
        "model": {"kind": "tfim", "n_sites": 3},
        "backend": {"kind": "exact"},
    }}
    resp = client.post("/experiments/tfim-matrix", json=payload)
    assert resp.status_code == 200
    units = resp.json()["units"]
    assert len(units) == 9
    for u in units:
        assert u["summary"]["recovered_mean"] == pytest.approx(100.0, abs=1e-3)


def test_config_validation_rejected():
    resp = client.post("/experiments/h2-curve",
                       json={"config": {"model": {"kind": "nonsense"}}})
    assert resp.status_code == 422


def test_model_mismatch_is_client_error():
    resp = client.post("/experiments/h2-curve",
                       json={"config": {"model": {"kind": "tfim"}}})
    assert resp.status_code == 400
    assert "h2" in resp.json()["detail"]


def test_calibration_endpoint():
    payload = {"n_qubits": 2, "shots": 4096, "seed": 1,
               "noise": {"readout_flip_01": 0.05, "readout_flip_10": 0.1}}
    resp = client.post("/calibration", json=payload)
    assert resp.status_code == 200
    body = resp.json()
    mat = np.array(body["matrix"])
    assert mat.shape == (4, 4)
    assert np.allclose(mat.sum(axis=0), 1.0)
    # diagonal dominated by survival probabilities
    assert mat[0, 0] == pytest.approx(0.95 ** 2, abs=0.02)


def test_scaling_endpoint_exact_small():
    payload = {"config": {
        "model": {"kind": "tfim"},
        "backend": {"kind": "exact"},
        "site_range": [4, 4],
    }}
    resp = client.post("/experiments/scaling", json=payload)
    assert resp.status_code == 200
    gaps = resp.json()["summary"]["iteration_gap_vqe_minus_pqe"]
    assert set(gaps) == {"4"}


def test_record_is_deterministic_over_http():
    payload = {"config": {
        "model": {"kind": "h2", "geometries": [1.0]},
        "backend": {"kind": "shots", "shots": 512, "seed": 5},
        "repeats": 2,
    }}
    a = client.post("/experiments/h2-curve", json=payload).json()
    b = client.post("/experiments/h2-curve", json=payload).json()
    a.pop("created_at")
    b.pop("created_at")
    assert a == b
