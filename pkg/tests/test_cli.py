import json
import shutil
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from pollinet import config as cfgmod
from pollinet.cli import main
from pollinet.errors import ConfigError
from pollinet.plotting import emit_plot

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_cfg(tmp_path, name, **changes):
    cfg = json.loads((CONFIGS / name).read_text())
    for key, val in changes.items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    cfg["out"] = str(tmp_path / "out")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg, indent=2))
    return path


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    return lines[0].split(","), np.array([[float(v) for v in l.split(",")] for l in lines[1:]])


def test_analyze_pair_reports_three_equilibria(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "pair_bistable.json", pair={"basinResolution": 12})
    assert main(["analyze-pair", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "assumption: single pair with c = 1, k = 1, h = 1" in out
    assert "total equilibria: 3 (positive: 2)" in out
    doc = json.loads((tmp_path / "out" / "equilibria.json").read_text())
    assert doc["totalCount"] == 3 and doc["assumption"]
    for name in ("nullcline_plant.csv", "nullcline_pollinator.csv", "basins.csv", "phase_plane.svg",
                 "config.resolved.json"):
        assert (tmp_path / "out" / name).exists()


def test_missing_rate_field_exits_with_config_error(tmp_path, capsys):
    text = '{\n  "rates": {\n    "betaP": 1, "gammaP": 1, "dP": 1, "deltaP": 3,\n' \
           '    "alphaA": 25, "betaA": 1, "gammaA": 1, "dA": 2\n  }\n}\n'
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert main(["analyze-pair", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "rates.alphaP" in err and f"{path}:2:" in err


def test_malformed_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "seed": 1,\n  "rates": {,}\n}\n')
    assert main(["integrate-ode", "--config", str(path)]) == 2
    assert f"{path}:3:" in capsys.readouterr().err


@pytest.mark.parametrize("cmd,cfg,extra,files", [
    ("sample-graph", "community3.json", [], ["edges.csv", "degrees.json", "community.json", "degrees.svg"]),
    ("integrate-ode", "community3.json", [], ["trajectory.csv", "trajectory.json", "trajectory.svg"]),
    ("simulate-ibm", "community3.json", ["--replicas", "2", "--t-end", "1"],
     ["replica_000.csv", "replica_001.json", "summary.json"]),
    ("simulate-fluctuations", "community3.json", ["--replicas", "20", "--paths", "50", "--t-end", "0.5"],
     ["summary.json", "ou_paths.csv"]),
    ("solve-kinetic", "kinetic_collapse.json", ["--N", "20", "--snapshots", "0,10,50"],
     ["snapshot_t50.csv", "collapse.json", "densities.svg"]),
    ("convergence-study", "convergence.json", ["--N", "50", "--n-values", "10,20", "--seeds", "2",
                                                "--times", "0,1"],
     ["convergence.csv", "convergence.json", "convergence.svg"]),
])
def test_subcommands_write_outputs(tmp_path, cmd, cfg, extra, files):
    path = write_cfg(tmp_path, cfg)
    assert main([cmd, "--config", str(path), *extra]) == 0
    for name in files:
        assert (tmp_path / "out" / name).stat().st_size > 0, name


def test_rerun_from_resolved_config_is_identical(tmp_path):
    path = write_cfg(tmp_path, "community3.json")
    out = tmp_path / "out"
    assert main(["simulate-ibm", "--config", str(path), "--replicas", "2", "--t-end", "1", "--no-plots"]) == 0
    first = tmp_path / "first"
    shutil.copytree(out, first)
    assert main(["simulate-ibm", "--config", str(out / "config.resolved.json")]) == 0
    for f in sorted(first.iterdir()):
        assert (out / f.name).read_bytes() == f.read_bytes(), f.name


def test_event_budget_exit_code(tmp_path):
    path = write_cfg(tmp_path, "community3.json", schedule={"maxEvents": 50, "replicas": 1})
    assert main(["simulate-ibm", "--config", str(path), "--no-plots"]) == 3
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["partial"] and summary["replicas"][0]["partial"]


def test_lln_study_error_decreases(tmp_path):
    path = write_cfg(tmp_path, "community3.json")
    assert main(["lln-study", "--config", str(path), "--K", "100,400,1600", "--replicas", "40",
                 "--t-end", "2", "--no-plots"]) == 0
    header, rows = read_csv(tmp_path / "out" / "lln.csv")
    err = rows[:, header.index("rmsSupError")]
    assert np.all(np.diff(err) < 0)


def test_jobs_from_environment_do_not_change_results(tmp_path, monkeypatch):
    path = write_cfg(tmp_path, "community3.json")
    args = ["simulate-ibm", "--config", str(path), "--replicas", "3", "--t-end", "0.5", "--no-plots"]
    assert main(args) == 0
    serial = (tmp_path / "out" / "replica_002.csv").read_bytes()
    monkeypatch.setenv("POLLINET_JOBS", "2")
    assert main(args) == 0
    assert (tmp_path / "out" / "replica_002.csv").read_bytes() == serial
    monkeypatch.setenv("POLLINET_JOBS", "two")
    assert main(args) == 2


# -- configuration ---------------------------------------------------------

RATES = {"alphaP": 9, "betaP": 1, "gammaP": 1, "dP": 1, "deltaP": 3,
         "alphaA": 25, "betaA": 1, "gammaA": 1, "dA": 2}


def test_defaults_are_merged():
    cfg = cfgmod.parse(json.dumps({"rates": RATES}))
    assert cfg["scale"]["K"] == 1000 and cfg["pair"]["c"] == 1.0 and cfg["plots"] is True


@pytest.mark.parametrize("bad,field", [
    ({"rates": {**RATES, "dA": -1}}, "rates.dA"),
    ({"rates": RATES, "unknown": 1}, "<root>"),
    ({"rates": RATES, "scale": {"K": 0}}, "scale.K"),
    ({"rates": RATES, "community": {"graphon": {"kind": "constant", "phi0": 1}}}, "community.harvest"),
])
def test_schema_violations_name_the_field(bad, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        cfgmod.parse(json.dumps(bad, indent=1))


def test_semantic_check_via_constructors():
    bad = {"rates": RATES, "community": {"graphon": {"kind": "constant", "phi0": 1.5},
                                         "harvest": {"kind": "constant"}}}
    with pytest.raises(ConfigError, match="outside"):
        cfgmod.parse(json.dumps(bad))


def test_overrides_are_validated():
    with pytest.raises(ConfigError, match="command-line"):
        cfgmod.parse(json.dumps({"rates": RATES}), overrides={"scale": {"K": -3}})


# -- plotting --------------------------------------------------------------

def _svg_root(path):
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    return root


@pytest.mark.parametrize("kind", ["lines", "phasePlane", "densitySnapshots", "loglog"])
def test_empty_plots_are_valid_svg(tmp_path, kind):
    data = {} if kind != "loglog" else {"series": []}
    root = _svg_root(emit_plot(kind, data, tmp_path / "p.svg"))
    groups = [g.get("id", "") for g in root.iter() if g.tag.endswith("g")]
    assert any(i.startswith("axes_") for i in groups)


def test_plots_are_deterministic(tmp_path):
    data = {"series": [{"x": [0, 1, 2], "y": [1, 3, 2], "label": "P1"}], "xlabel": "t", "ylabel": "P"}
    a = emit_plot("lines", data, tmp_path / "a.svg").read_bytes()
    b = emit_plot("lines", data, tmp_path / "b.svg").read_bytes()
    assert a == b


def test_density_snapshots_draw_one_curve_per_time(tmp_path):
    x = np.linspace(0, 1, 11)
    data = {"x": x, "snapshots": [{"t": t, "p": 1 + x * t, "a": 2 - x} for t in (0, 1, 2)]}
    root = _svg_root(emit_plot("densitySnapshots", data, tmp_path / "d.svg"))
    lines = [g for g in root.iter() if g.tag.endswith("g") and g.get("id", "").startswith("line2d_")]
    # data curves have all 11 vertices; legend handles have two
    curves = [g for g in lines if any(p.get("d", "").count("L") == 10 for p in g.iter() if p.tag.endswith("path"))]
    assert len(curves) == 6
    colours = sorted(p.get("style").split("stroke: ")[1].split(";")[0] for g in curves for p in g.iter()
                     if p.tag.endswith("path"))
    assert len(set(colours)) == 3 and all(colours.count(c) == 2 for c in colours)


def test_unknown_plot_kind(tmp_path):
    with pytest.raises(ValueError, match="unknown plot kind"):
        emit_plot("histogram", {}, tmp_path / "x.svg")
