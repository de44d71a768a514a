import json
import threading

import pytest
from click.testing import CliRunner

from pqelab.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def test_h2_curve_json_output(runner, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "model:\n  kind: h2\n  geometries: [0.75]\nbackend:\n  kind: exact\n")
    result = runner.invoke(main, ["h2-curve", "--config", str(cfg),
                                  "--out", str(tmp_path), "--format", "json"])
    assert result.exit_code == 0, result.output
    record = json.loads((tmp_path / "h2-curve.json").read_text())
    assert record["experiment"] == "h2-curve"


def test_csv_format_and_repeats_override(runner, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "model:\n  kind: h2\n  geometries: [0.75, 1.0]\n"
        "backend:\n  kind: shots\n  shots: 256\n")
    result = runner.invoke(main, ["h2-curve", "--config", str(cfg),
                                  "--repeats", "3", "--seed", "4",
                                  "--out", str(tmp_path), "--format", "csv"])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "h2-curve.csv").read_text().strip().splitlines()
    assert len(lines) - 1 == 2 * 3


def test_bad_config_nonzero_exit(runner, tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("backend:\n  kind: warp-drive\n")
    result = runner.invoke(main, ["tfim-matrix", "--config", str(cfg)])
    assert result.exit_code != 0
    assert result.output.strip() != ""


def test_missing_config_file(runner):
    result = runner.invoke(main, ["scaling", "--config", "/no/such/file.yaml"])
    assert result.exit_code != 0


def test_calibrate_writes_matrix(runner, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "model:\n  kind: tfim\n  n_sites: 2\n"
        "backend:\n  kind: shots\n  shots: 2048\n"
        "  noise:\n    readout_flip_01: 0.05\n    readout_flip_10: 0.05\n")
    result = runner.invoke(main, ["calibrate", "--config", str(cfg),
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "calibration.json").read_text())
    assert payload["n_qubits"] == 2
    assert len(payload["matrix"]) == 4


def test_all_experiment_subcommands_exist(runner):
    result = runner.invoke(main, ["--help"])
    for name in ("h2-curve", "tfim-matrix", "tfim-truncation",
                 "tfim-correlations", "scaling", "calibrate", "serve"):
        assert name in result.output


def test_remote_dispatch_against_live_server(runner, tmp_path):
    # thin-client mode: run the service in-process and submit over HTTP
    import uvicorn

    from pqelab.service import app

    config = uvicorn.Config(app, host="127.0.0.1", port=8765, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    import time
    for _ in range(100):
        if server.started:
            break
        time.sleep(0.05)
    assert server.started
    try:
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(
            "model:\n  kind: h2\n  geometries: [1.0]\nbackend:\n  kind: exact\n")
        result = runner.invoke(main, ["h2-curve", "--config", str(cfg),
                                      "--out", str(tmp_path),
                                      "--server", "http://127.0.0.1:8765"])
        assert result.exit_code == 0, result.output
        record = json.loads((tmp_path / "h2-curve.json").read_text())
        assert record["summary"]["max_abs_mean_error"] < 1e-8
    finally:
        server.should_exit = True
        thread.join(timeout=5)
