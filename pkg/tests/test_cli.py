import json
import socket
import threading
import time

import pytest

from hessian2.cli import load_config_file, main


def test_tau_prints_record(capsys):
    assert main(["tau", "--f0", "0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["values"] == [2, 2, -1]
    assert doc["cone"] == "P2"


def test_tau_requires_f0(capsys):
    assert main(["tau"]) == 2
    assert "requires --f0" in capsys.readouterr().err


def test_tau_mode_error(capsys):
    assert main(["tau", "--f0", "-1", "--mode", "convex"]) == 2


def test_solve_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["solve", "--f", "0", "--n", "17", "--out", str(out), "--emit-fields"])
    assert rc == 0
    assert (out / "convergence.csv").exists()
    assert (out / "report.json").exists()
    assert (out / "w.csv").exists()
    assert (out / "u-samples.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["convexity"] == "one_convex_not_convex"
    assert report["run"]["outcome"] == "Converged"
    assert report["config"]["n"] == 17
    header = (out / "convergence.csv").read_text().splitlines()[0]
    assert header == "m,g_sup,rho_sup,w_proxy,ellipticity_margin,eps"


def test_solve_parse_error_exit_2(tmp_path, capsys):
    rc = main(["solve", "--f", "sin(y1", "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "expected" in capsys.readouterr().err


def test_solve_eval_error_exit_2(tmp_path, capsys):
    # parses fine, but evaluating f at the base point divides by zero
    rc = main(["solve", "--f", "1/(y1-y1)", "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "division by zero" in capsys.readouterr().err


def test_solve_config_error_exit_2(tmp_path, capsys):
    rc = main(["solve", "--f", "0", "--n", "16", "--out", str(tmp_path / "x")])
    assert rc == 2


def test_solve_eps_exhausted_exit_3(tmp_path, capsys):
    rc = main(
        ["solve", "--f", "1000*y1", "--n", "9", "--max-eps-halvings", "0",
         "--out", str(tmp_path / "x")]
    )
    assert rc == 3


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# sample config\n"
        "f = y1\n"
        "n = 33\n"
        "eps = 0.1\n"
        "emit_fields = false\n"
    )
    out = tmp_path / "run"
    rc = main(["solve", "--config", str(cfg), "--n", "17", "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["n"] == 17  # flag wins
    assert report["config"]["f"] == "y1"  # from file


def test_config_file_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not a pair\n")
    with pytest.raises(ValueError):
        load_config_file(str(cfg))
    cfg.write_text("mystery = 3\n")
    with pytest.raises(ValueError, match="unknown config key"):
        load_config_file(str(cfg))


def test_verify_roundtrip(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["solve", "--f", "y1", "--n", "17", "--out", str(out),
                 "--emit-fields"]) == 0
    capsys.readouterr()
    rc = main(["verify", "--out", str(out)])
    captured = capsys.readouterr()
    assert rc == 0
    doc = json.loads(captured.out)
    assert doc["convexity"] == "one_convex_not_convex"


def test_verify_missing_fields_exit_2(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["solve", "--f", "0", "--n", "17", "--out", str(out)]) == 0
    rc = main(["verify", "--out", str(out)])
    assert rc == 2
    assert "emit-fields" in capsys.readouterr().err


def test_verify_detects_tampering_exit_5(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["solve", "--f", "0", "--n", "17", "--out", str(out),
                 "--emit-fields"]) == 0
    # corrupt the dumped field hard enough to break ellipticity
    lines = (out / "w.csv").read_text().splitlines()
    header, rows = lines[0], lines[1:]
    damaged = [header]
    for row in rows:
        parts = row.split(",")
        parts[-1] = "0.5"
        damaged.append(",".join(parts))
    (out / "w.csv").write_text("\n".join(damaged) + "\n")
    rc = main(["verify", "--out", str(out)])
    assert rc == 5


def test_sweep_csv(tmp_path, capsys):
    rc = main(["sweep", "--f", "y1", "--n", "17", "--eps", "0.1,0.05",
               "--out", str(tmp_path)])
    assert rc == 0
    text = capsys.readouterr().out
    lines = text.strip().splitlines()
    assert lines[0] == "eps,g0_sup,margin"
    assert len(lines) == 3
    assert (tmp_path / "sweep.csv").read_text() == text
    g0 = [float(line.split(",")[1]) for line in lines[1:]]
    assert g0[1] / g0[0] == pytest.approx(0.5, abs=1e-12)


def test_sweep_requires_eps(capsys):
    assert main(["sweep", "--f", "y1", "--n", "17"]) == 2


def test_determinism_byte_identical(tmp_path):
    out = tmp_path / "run"
    args = ["solve", "--f", "y1", "--n", "17", "--threads", "1",
            "--out", str(out)]
    assert main(args) == 0
    first_csv = (out / "convergence.csv").read_bytes()
    first_json = (out / "report.json").read_bytes()
    assert main(args) == 0
    assert (out / "convergence.csv").read_bytes() == first_csv
    assert (out / "report.json").read_bytes() == first_json


def test_report_config_reproduces_run(tmp_path):
    # rerunning from the embedded config yields identical convergence.csv
    out1 = tmp_path / "a"
    assert main(["solve", "--f", "y1", "--n", "17", "--out", str(out1)]) == 0
    report = json.loads((out1 / "report.json").read_text())
    cfg = report["config"]
    cfg_file = tmp_path / "replay.cfg"
    cfg_file.write_text(
        f"f = {cfg['f']}\n"
        f"n = {cfg['n']}\n"
        f"eps = {cfg['eps_initial']:.17g}\n"
        f"eps_shrink = {cfg['eps_shrink']:.17g}\n"
        f"stop_tol = {cfg['stop_tol']:.17g}\n"
    )
    out2 = tmp_path / "b"
    assert main(["solve", "--config", str(cfg_file), "--out", str(out2)]) == 0
    assert (out1 / "convergence.csv").read_bytes() == (out2 / "convergence.csv").read_bytes()


# ---------------------------------------------------------------------------
# Remote mode against a real server


@pytest.mark.slow
def test_remote_tau_against_live_server():
    uvicorn = pytest.importorskip("uvicorn")
    from hessian2.service.app import app

    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]

    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        import httpx

        deadline = time.time() + 15
        url = f"http://127.0.0.1:{port}"
        while time.time() < deadline:
            try:
                if httpx.get(f"{url}/health", timeout=1.0).status_code == 200:
                    break
            except Exception:
                time.sleep(0.1)
        else:
            pytest.skip("server did not come up")
        rc = main(["tau", "--f0", "3", "--mode", "convex", "--server", url])
        assert rc == 0
    finally:
        server.should_exit = True
        thread.join(timeout=10)
