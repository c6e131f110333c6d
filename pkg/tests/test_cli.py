from __future__ import annotations

import csv
import json
import shutil
import subprocess
import sys

import pytest

from cosmos.artifacts import load_regions
from cosmos.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, EXIT_PLANNING, EXIT_REFUSED, run
from cosmos.model import span


def rj(path):
    return json.loads(path.read_text())


def rows(path):
    with path.open() as fh:
        return list(csv.DictReader(fh))


def tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_characterize_demo(data_dir, tmp_path, capsys):
    assert run(["characterize", "--config", str(data_dir / "demo.json"), "--out", str(tmp_path)]) == EXIT_OK
    regions = rj(tmp_path / "regions.json")
    (demo,) = regions["components"]
    assert len(demo["regions"]) == 2
    assert rj(tmp_path / "ledger.json")["hls_count"] == 4
    assert "demo: 2 region(s)" in capsys.readouterr().out


def test_rerun_is_byte_identical(data_dir, tmp_path):
    args = ["characterize", "--config", str(data_dir / "wami.json"), "--out", str(tmp_path)]
    assert run(args) == EXIT_OK
    first = tree(tmp_path)
    assert run(args + ["--jobs", "4"]) == EXIT_OK
    assert tree(tmp_path) == first


def test_unknown_binding_exit_code(data_dir, tmp_path, capsys):
    d = json.loads((data_dir / "demo.json").read_text())
    d["graph"]["transitions"][0]["component"] = "ghost"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(d))
    assert run(["characterize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "unknown binding 'ghost'" in capsys.readouterr().err


def test_explore_ring(data_dir, tmp_path):
    cfg = str(data_dir / "ring.json")
    assert run(["characterize", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert run(["explore", "--config", cfg, "--out", str(tmp_path), "--delta", "0.1"]) == EXIT_OK
    pareto = rj(tmp_path / "pareto.json")
    assert len(pareto["points"]) == 10
    assert all("sigma" in p for p in pareto["points"])
    assert len(rows(tmp_path / "planned.csv")) == 10
    assert len(rows(tmp_path / "pareto.csv")) == 10
    assert run(["explore", "--config", cfg, "--out", str(tmp_path), "--delta", "100"]) == EXIT_OK
    assert len(rj(tmp_path / "planned.json")["points"]) == 2


def test_explore_with_explicit_regions(data_dir, tmp_path):
    cfg = str(data_dir / "ring.json")
    run(["characterize", "--config", cfg, "--out", str(tmp_path / "a")])
    rc = run(["explore", "--config", cfg, "--out", str(tmp_path / "b"), "--regions", str(tmp_path / "a" / "regions.json")])
    assert rc == EXIT_OK and (tmp_path / "b" / "pareto.json").exists()


def test_explore_wami_cost_monotone(data_dir, tmp_path):
    cfg = str(data_dir / "wami.json")
    run(["characterize", "--config", cfg, "--out", str(tmp_path)])
    assert run(["explore", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    pts = rj(tmp_path / "planned.json")["points"]
    by_theta = sorted(pts, key=lambda p: -p["theta"])
    costs = [p["planned_cost_mm2"] for p in by_theta]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(costs, costs[1:]))
    for p in rj(tmp_path / "pareto.json")["points"]:
        if not p["shortfall"]:
            assert p["realized_theta"] >= p["planned_theta"] * (1 - 1e-8)


def test_explore_deadlock_names_cycle(data_dir, tmp_path, capsys):
    d = json.loads((data_dir / "ring.json").read_text())
    d["graph"]["marking"] = [0, 0]
    d["backend"]["table"] = str(data_dir / "ring_table.csv")
    cfg = tmp_path / "dead.json"
    cfg.write_text(json.dumps(d))
    assert run(["characterize", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    assert run(["explore", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PLANNING
    err = capsys.readouterr().err
    assert "token-free cycle" in err and "tA" in err and "tB" in err


def test_exhaustive_refusal_and_success(data_dir, tmp_path, capsys):
    assert run(["exhaustive", "--config", str(data_dir / "wami.json"), "--out", str(tmp_path / "w")]) == EXIT_REFUSED
    doc = rj(tmp_path / "w" / "exhaustive.json")
    assert doc["refused"] and doc["combinations"] > doc["max_combinations"]
    assert str(doc["combinations"]) in capsys.readouterr().err
    assert run(["exhaustive", "--config", str(data_dir / "ring.json"), "--out", str(tmp_path / "r")]) == EXIT_OK
    doc = rj(tmp_path / "r" / "exhaustive.json")
    assert doc["combinations"] == 4 and doc["hls_invocations"] == 4 and not doc["refused"]
    assert rows(tmp_path / "r" / "exhaustive_pareto.csv")


def test_report_requires_inputs(tmp_path, capsys):
    assert run(["report", "--out", str(tmp_path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "regions.json" in err and "ledger.json" in err


def test_report_after_demo(data_dir, tmp_path):
    cfg = str(data_dir / "demo.json")
    for cmd in ("characterize", "explore", "exhaustive"):
        assert run([cmd, "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert run(["report", "--out", str(tmp_path)]) == EXIT_OK
    rep = rj(tmp_path / "report.json")
    chars = load_regions(tmp_path / "regions.json")
    want = span([p.design_point() for p in chars["demo"].all_points])
    (row,) = rep["components"]
    assert row["lambda_span"] == pytest.approx(want[0], rel=1e-8)
    assert row["alpha_span"] == pytest.approx(want[1], rel=1e-8)
    assert row["dual_port_lambda_span"] <= row["lambda_span"]
    ledger = rj(tmp_path / "ledger.json")
    ex = rj(tmp_path / "exhaustive.json")["hls_invocations"]
    assert rep["invocations"]["ratio"] == pytest.approx(ex / ledger["hls_count"])
    assert rep["invocations"]["ratio"] > 1
    for name in ("spans.csv", "plot_invocations.csv", "plot_component_points.csv", "plot_system_pareto.csv"):
        assert rows(tmp_path / name)


def test_report_gradient_dual_port(data_dir, tmp_path, capsys):
    cfg = str(data_dir / "gradient.json")
    assert run(["characterize", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert run(["report", "--out", str(tmp_path)]) == EXIT_OK
    (row,) = rj(tmp_path / "report.json")["components"]
    assert round(row["lambda_span"], 2) == 7.89 and round(row["alpha_span"], 2) == 3.65
    assert round(row["dual_port_lambda_span"], 2) == 1.39 and round(row["dual_port_alpha_span"], 2) == 1.22
    assert "7.89x" in capsys.readouterr().out


def test_backend_override_flags(data_dir, tmp_path):
    cfg = tmp_path / "g.json"
    d = json.loads((data_dir / "gradient.json").read_text())
    d["backend"] = {"kind": "simulated"}
    cfg.write_text(json.dumps(d))
    rc = run(["characterize", "--config", str(cfg), "--out", str(tmp_path / "o"),
              "--backend", "table", "--table", str(data_dir / "gradient_table.csv")])
    assert rc == EXIT_OK
    (comp,) = rj(tmp_path / "o" / "regions.json")["components"]
    assert comp["regions"][-1]["lambda_min_ms"] == pytest.approx(0.139)
    assert run(["characterize", "--config", str(cfg), "--out", str(tmp_path / "p"), "--backend", "table"]) == EXIT_CONFIG


def test_missing_table_row_fails_only_that_component(data_dir, tmp_path, capsys):
    table = tmp_path / "t.csv"
    lines = (data_dir / "ring_table.csv").read_text().splitlines()
    table.write_text("\n".join(l for l in lines if not l.startswith("A,2,")) + "\n")
    rc = run(["characterize", "--config", str(data_dir / "ring.json"), "--out", str(tmp_path / "o"), "--table", str(table)])
    assert rc == EXIT_FAILURE
    assert "A: FAILED no table row" in capsys.readouterr().err
    doc = rj(tmp_path / "o" / "regions.json")
    assert [c["component"] for c in doc["components"]] == ["B"]
    assert list(doc["failed"]) == ["A"]


def test_console_script(data_dir, tmp_path):
    exe = shutil.which("cosmos")
    cmd = [exe] if exe else [sys.executable, "-m", "cosmos.cli"]
    out = subprocess.run(cmd + ["characterize", "--config", str(data_dir / "demo.json"), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    bad = subprocess.run(cmd + ["characterize", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert bad.returncode == 2
