import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from obicsim import cli
from obicsim.calibration import FitResult
from obicsim.netlist import CellLibrary, Rect, Transistor, parse_cell_library, serialize_cell_library
from obicsim.photo import induced_current
from obicsim.traces import load_scenario, parse_trace_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(*argv):
    return cli.main([*map(str, argv), "--quiet"])


@pytest.fixture()
def work(tmp_path):
    shutil.copytree(CONFIGS, tmp_path / "configs")
    (tmp_path / "out").mkdir()
    return tmp_path


@pytest.fixture()
def calibrated(work):
    assert run("calibrate", work / "configs/measured_anchors.csv", work / "configs/chain_template.json",
               "--out", work / "out/fit.json") == 0
    return work


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2))
    return path


def _template(work, **over):
    d = json.loads((work / "configs/chain_template.json").read_text())
    d["params"] = "../out/fit.json"
    d.update(over)
    return d


# --- fixtures --------------------------------------------------------------


def test_fixtures(tmp_path):
    out = tmp_path / "fx"
    assert run("fixtures", "--out", out) == 0
    assert sorted(p.name for p in out.iterdir()) == ["cells.net", "libval_nand_chain.net"]
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert run("fixtures", "--out", out) == 0
    assert {p.name: p.read_bytes() for p in out.iterdir()} == first
    cells = parse_cell_library((out / "cells.net").read_text())
    chain = parse_cell_library((out / "libval_nand_chain.net").read_text(), base=cells)
    assert chain.chip("LIBVAL_NAND_CHAIN").tie_map() == {"B_TIE": 1}
    assert "tie B_TIE 1" in (out / "libval_nand_chain.net").read_text()


# --- calibrate -------------------------------------------------------------


def test_calibrate_measured(calibrated):
    fit = json.loads((calibrated / "out/fit.json").read_text())
    assert fit["converged"] is True
    assert all(abs(r) < 0.02 for r in fit["per_anchor_residuals"][:2])
    assert {"params", "residual_uA", "converged", "per_anchor_residuals"} <= set(fit)
    s = load_scenario(calibrated / "out/fit.scenario.json")
    assert s.expected_total == pytest.approx(0.81, abs=0.02)


def test_calibrate_round_trip(work, nand):
    from obicsim.calibration import forward_anchors, write_anchors_csv
    from obicsim.photo import LaserSpot, ObicParams

    truth = ObicParams(4.0, 6.0, 120.0, {"ndiff": 0.6, "pdiff": 0.3, "nwell": 1.0})
    spot = LaserSpot(*nand.bbox.center)
    anchors = forward_anchors(truth, nand, spot, (10, 15, 20, 30, 45), ("01", "10", "11"))
    (work / "rt.csv").write_text(write_anchors_csv(anchors))
    tmpl = _write_json(work / "rt.json", {"design": "NAND2X1", "pattern": "01",
                                           "spot": {"cx": spot.cx, "cy": spot.cy}})
    assert run("calibrate", work / "rt.csv", tmpl, "--out", work / "rt_fit.json") == 0
    got = json.loads((work / "rt_fit.json").read_text())["params"]
    assert got["p_th"] == pytest.approx(4.0, rel=0.1)
    assert got["p_k"] == pytest.approx(6.0, rel=0.1)
    assert got["i_sat"] == pytest.approx(120.0, rel=0.1)
    for k, v in truth.kappa.items():
        assert got["kappa"][k] == pytest.approx(v, rel=0.1)


def test_calibrate_non_convergence(work, monkeypatch, capsys, measured_fit):
    stuck = FitResult(measured_fit.params, 1.0, 10_000, False, (1.0,) * 4)
    monkeypatch.setattr(cli, "fit_params", lambda *a, **k: stuck)
    rc = run("calibrate", work / "configs/measured_anchors.csv", work / "configs/chain_template.json",
             "--out", work / "out/fit.json")
    assert rc == 3
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "converge" in err
    assert json.loads((work / "out/fit.json").read_text())["converged"] is False


# --- simulate --------------------------------------------------------------


def test_simulate(calibrated):
    out = calibrated / "out/t01.csv"
    assert run("simulate", calibrated / "configs/sim_01.json", "--out", out) == 0
    traces = parse_trace_csv(out.read_text())
    assert len(traces) == 3 and all(len(t) == 25 for t in traces)
    summary = json.loads((calibrated / "out/t01.summary.json").read_text())
    entry = summary["patterns"]["01"]
    assert entry["in_pulse_mean_uA"] == pytest.approx(0.81, abs=0.05)
    assert entry["window"][0] == 6
    assert len(summary["per_trace"]) == 3


def test_simulate_dark(calibrated):
    cfg = _write_json(calibrated / "configs/dark.json",
                      {"extends": "sim_01.json", "spot": {"power_pct": 0.0}})
    assert run("simulate", cfg, "--out", calibrated / "out/dark.csv") == 0
    entry = json.loads((calibrated / "out/dark.summary.json").read_text())["patterns"]["01"]
    assert entry["window"] is None
    assert abs(entry["in_pulse_mean_uA"]) < 0.1


def test_simulate_traces_flag(calibrated):
    out = calibrated / "out/t.csv"
    assert run("simulate", calibrated / "configs/sim_11.json", "--traces", 5, "--seed", 1, "--out", out) == 0
    assert len(parse_trace_csv(out.read_text())) == 5


def test_simulate_plot(calibrated):
    out = calibrated / "out/t01.csv"
    assert run("simulate", calibrated / "configs/sim_01.json", "--out", out, "--plot") == 0
    png = calibrated / "out/t01.png"
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


# --- scan ------------------------------------------------------------------


def _scan_rows(path):
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["x_um", "y_um", "pattern", "total_uA"]
    return [(float(x), float(y), p, float(v)) for x, y, p, v in rows[1:]]


def test_scan_single_point(calibrated):
    cfg = _write_json(calibrated / "configs/s1.json", {
        "extends": "chain_template.json", "params": "../out/fit.json", "design": "NAND2X1",
        "patterns": ["00", "01", "10", "11"], "grid": {"x": [2.15, 2.15, 1], "y": [1.7, 1.7, 1]},
    })
    assert run("scan", cfg, "--out", calibrated / "out/s1.csv") == 0
    assert len(_scan_rows(calibrated / "out/s1.csv")) == 4


def test_scan_far_off_cell(calibrated):
    cfg = _write_json(calibrated / "configs/far.json", {
        "extends": "scan_nand.json", "grid": {"x": [500, 501, 0.5], "y": [500, 501, 0.5]},
    })
    assert run("scan", cfg, "--out", calibrated / "out/far.csv") == 0
    rows = _scan_rows(calibrated / "out/far.csv")
    assert len(rows) == 3 * 3 * 2
    assert all(v == 0.0 for *_, v in rows)


def test_scan_matches_direct(calibrated, nand):
    out = calibrated / "out/scan.csv"
    assert run("scan", calibrated / "configs/scan_nand.json", "--out", out, "--plot") == 0
    assert (calibrated / "out/scan.png").exists()
    rows = _scan_rows(out)
    s = load_scenario(calibrated / "out/fit.scenario.json")
    xs = {r[0] for r in rows}
    ys = {r[1] for r in rows}
    assert len(rows) == len(xs) * len(ys) * 2
    table = {(x, y, p): v for x, y, p, v in rows}
    nmos_cells = [(x, y) for x in xs for y in ys if 1.0 <= x <= 3.5 and 1.0 <= y <= 2.5]
    assert nmos_cells
    for x, y in nmos_cells:
        assert table[(x, y, "01")] > table[(x, y, "11")]
        for p in ("01", "11"):
            direct = induced_current(nand, p, s.spot.moved(x, y), s.params).total
            assert table[(x, y, p)] == pytest.approx(direct, abs=1e-6)


# --- attack ----------------------------------------------------------------


def test_attack_zero_noise(calibrated):
    cfg = _write_json(calibrated / "configs/a0.json", {
        "a": {**_template(calibrated, pattern="01"), "noise": {"kind": "uniform", "amplitude": 0.0}},
        "b": {**_template(calibrated, pattern="11"), "noise": {"kind": "uniform", "amplitude": 0.0}},
        "cap": 10, "pool": 200, "campaign_traces": 50,
    })
    assert run("attack", cfg, "--out", calibrated / "out/a0.json") == 0
    rep = json.loads((calibrated / "out/a0.json").read_text())
    assert rep["n_traces"] == 1 and rep["distinguishable"]
    assert rep["single_trace_accuracy"] == 1.0


def test_attack_identical(calibrated):
    cfg = _write_json(calibrated / "configs/aid.json", {
        "scenario": "sim_01.json", "patterns": ["01", "01"], "cap": 20, "pool": 500, "campaign_traces": 50,
    })
    assert run("attack", cfg, "--out", calibrated / "out/aid.json") == 0
    rep = json.loads((calibrated / "out/aid.json").read_text())
    assert rep["n_traces"] is None and rep["distinguishable"] is False


def test_attack_measured_pair(calibrated):
    assert run("attack", calibrated / "configs/attack.json", "--out", calibrated / "out/attack.json") == 0
    rep = json.loads((calibrated / "out/attack.json").read_text())
    assert rep["patterns"] == ["01", "11"]
    assert rep["n_traces"] in (2, 3, 4)
    assert rep["welch_t"] > 10
    assert len(rep["accuracy_by_n"]) == rep["n_traces"]


# --- determinism -----------------------------------------------------------


def _pipeline(root):
    shutil.copytree(CONFIGS, root / "configs")
    c, o = root / "configs", root / "out"
    assert run("fixtures", "--out", o / "fixtures") == 0
    assert run("calibrate", c / "measured_anchors.csv", c / "chain_template.json", "--out", o / "fit.json", "--plot") == 0
    assert run("simulate", c / "sim_01.json", "--out", o / "t01.csv", "--plot") == 0
    assert run("simulate", c / "sim_11.json", "--out", o / "t11.csv") == 0
    small = _write_json(c / "scan_small.json", {"extends": "scan_nand.json", "grid": {"x": [0, 5, 0.5], "y": [0, 7, 0.5]}})
    assert run("scan", small, "--out", o / "scan.csv", "--plot") == 0
    fast = _write_json(c / "attack_fast.json", {**json.loads((c / "attack.json").read_text()), "pool": 500, "campaign_traces": 100})
    assert run("attack", fast, "--out", o / "attack.json") == 0
    return {p.relative_to(o).as_posix(): p.read_bytes() for p in sorted(o.rglob("*")) if p.is_file()}


def test_outputs_byte_stable(tmp_path):
    a = _pipeline(tmp_path / "a")
    b = _pipeline(tmp_path / "b")
    assert sorted(a) == sorted(b)
    for name in a:
        assert a[name] == b[name], name
    cells = parse_cell_library(a["fixtures/cells.net"].decode())
    parse_cell_library(a["fixtures/libval_nand_chain.net"].decode(), base=cells)
    for name, blob in a.items():
        if name.endswith(".json"):
            json.loads(blob)
    parse_trace_csv(a["t01.csv"].decode())


# --- exit codes ------------------------------------------------------------


def _shorted_netlist(nand):
    bad = Transistor("NX", "NMOS", "A", "VDD", "GND", Rect(0.6, 0.8, 1, 1), Rect(2, 0.8, 1, 1))
    from obicsim.netlist import Cell

    cell = Cell("SHORTED", nand.nets, nand.transistors + (bad,), nand.well, nand.bbox)
    return serialize_cell_library(CellLibrary((cell,)))


def _corpus(work, nand):
    c = work / "configs"
    (c / "broken.json").write_text('{\n  "design": "NAND2X1",\n  "pattern": "01",,\n}\n')
    (c / "list.json").write_text("[1, 2]\n")
    (c / "bad.net").write_text("cell X\n  net VDD supply\n  wire oops\nend\n")
    (c / "short.net").write_text(_shorted_netlist(nand))
    (c / "two.csv").write_text("power_pct,pattern,observed_uA,weight\n7,11,0.75,1\n7,01,0.81,1\n")
    (c / "hdr.csv").write_text("power,pattern,uA\n7,11,0.75\n")
    j = lambda name, obj: str(_write_json(c / name, obj))
    sim = lambda name, **over: j(name, {"extends": "sim_01.json", **over})
    return [
        # (argv, exit code, stderr fragment)
        (["bogus"], 1, "invalid choice"),
        (["simulate", c / "sim_01.json"], 1, "--out"),
        (["simulate", c / "missing.json", "--out", work / "x.csv"], 1, "missing.json"),
        (["simulate", c / "broken.json", "--out", work / "x.csv"], 1, "line 3"),
        (["simulate", c / "list.json", "--out", work / "x.csv"], 1, "line 1"),
        (["simulate", c / "sim_01.json", "--traces", 0, "--out", work / "x.csv"], 1, "traces"),
        (["simulate", sim("p3.json", pattern="010"), "--out", work / "x.csv"], 2, "primary inputs"),
        (["simulate", sim("tie.json", pattern="00"), "--out", work / "x.csv"], 2, "tied"),
        (["simulate", sim("nod.json", design="NOPE"), "--out", work / "x.csv"], 1, "NOPE"),
        (["simulate", sim("badnet.json", design="bad.net"), "--out", work / "x.csv"], 1, "line 3"),
        (["simulate", sim("short.json", design="short.net", pattern="10"), "--out", work / "x.csv"], 2, "GND"),
        (["simulate", sim("pw.json", spot={"power_pct": 150}), "--out", work / "x.csv"], 1, "power"),
        (["scan", j("g0.json", {"extends": "scan_nand.json", "grid": {"x": [0, 1, 0], "y": [0, 1, 1]}}),
          "--out", work / "x.csv"], 1, "step"),
        (["scan", j("g1.json", {"extends": "chain_template.json", "params": "../out/fit.json",
                               "patterns": ["01"], "grid": {"x": [0, 1, 1]}}),
          "--out", work / "x.csv"], 1, "grid.y"),
        (["scan", j("g2.json", {"extends": "scan_nand.json", "patterns": ["01", "0101"]}),
          "--out", work / "x.csv"], 2, "digits"),
        (["attack", j("a1.json", {"scenario": "sim_01.json", "patterns": ["01"]}), "--out", work / "x.json"], 1, "patterns"),
        (["attack", j("a2.json", {"scenario": "sim_01.json", "patterns": ["01", "11"], "target": 1.5}),
          "--out", work / "x.json"], 1, "target"),
        (["attack", j("a3.json", {"foo": 1}), "--out", work / "x.json"], 1, "attack config"),
        (["calibrate", c / "two.csv", c / "chain_template.json", "--out", work / "f.json"], 1, "at least 3"),
        (["calibrate", c / "hdr.csv", c / "chain_template.json", "--out", work / "f.json"], 1, "header"),
        (["calibrate", c / "nope.csv", c / "chain_template.json", "--out", work / "f.json"], 1, "nope.csv"),
        (["calibrate", c / "measured_anchors.csv", c / "broken.json", "--out", work / "f.json"], 1, "line 3"),
    ]


def test_exit_code_corpus(calibrated, nand, capsys):
    for argv, code, fragment in _corpus(calibrated, nand):
        capsys.readouterr()
        rc = run(*argv)
        err = capsys.readouterr().err
        assert rc == code, (argv, err)
        assert err.count("\n") == 1 and err.startswith("error:"), (argv, err)
        assert fragment in err, (argv, err)


def test_version(capsys):
    assert cli.main(["--version"]) == 0
    assert capsys.readouterr().out.strip() == cli.__version__
