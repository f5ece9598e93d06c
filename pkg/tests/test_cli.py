import json

import numpy as np
import pytest

from grls.behavior import load_estimate
from grls.cli import main, parse_config_file
from grls.manifold import chordal_distance


def test_identify_writes_outputs(tmp_path):
    out = tmp_path / "ident"
    rc = main(["identify", "--system", "double_integrator", "--sigma", "0.0",
               "--out", str(out)])
    assert rc == 0
    est = load_estimate(out / "estimate.npz")
    assert est.k == 37
    assert (out / "singular_values.csv").exists()
    assert (out / "data.csv").exists()
    est2 = load_estimate(out / "estimate.npz")
    assert chordal_distance(est.subspace, est2.subspace) <= 1e-12


def test_identify_too_short_horizon(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("system = double_integrator\nT_data = 10\n")
    rc = main(["identify", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_solve_writes_trace(tmp_path):
    out = tmp_path / "solve"
    rc = main(["solve", "--system", "double_integrator", "--sigma", "0.0",
               "--out", str(out)])
    assert rc == 0
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == "iter,cost,gradnorm,lambda,boundary"
    assert len(lines) > 2


def test_control_repeat(tmp_path):
    out = tmp_path / "ctl"
    cfg = tmp_path / "short.cfg"
    cfg.write_text("system = double_integrator\nT = 4\nmax_iter = 4000\n")
    rc = main(["control", "--config", str(cfg), "--repeat", "2",
               "--seed", "11", "--out", str(out)])
    assert rc == 0
    assert (out / "nominal.csv").exists()
    assert (out / "closed_loop_seed11.csv").exists()
    assert (out / "closed_loop_seed12.csv").exists()
    assert (out / "lambda_seed11.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert {s["seed"] for s in summary} == {11, 12}


def test_config_parsing(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nsystem = laplacian3\ngamma = 2.5\n"
                   "w_ref_point = [0, 0, 0, 0]\nrho_deg = 3.5\n")
    raw = parse_config_file(cfg)
    assert raw["gamma"] == 2.5
    assert raw["w_ref_point"] == [0, 0, 0, 0]


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("system = double_integrator\nnot_a_key = 3\n")
    rc = main(["identify", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 1


def test_missing_system_is_usage_error(tmp_path):
    rc = main(["solve", "--out", str(tmp_path / "o")])
    assert rc == 1


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


@pytest.mark.slow
def test_verify_passes(tmp_path):
    assert main(["verify", "--out", str(tmp_path / "v")]) == 0
    report = json.loads((tmp_path / "v" / "verify_report.json").read_text())
    assert all(entry["passed"] for entry in report.values())


@pytest.mark.slow
def test_verify_fault_injection_fails():
    assert main(["verify", "--fault-inject"]) == 3
