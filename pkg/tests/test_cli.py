import csv
import json

import numpy as np
import pytest

from prandtl_toolkit import acceptance as acc
from prandtl_toolkit import cli
from prandtl_toolkit.errors import ConfigError, ShootingError


@pytest.fixture(autouse=True)
def small_grids(monkeypatch):
    monkeypatch.setenv("TOOLKIT_GRID_SCALE", "0.25")


def _run(tmp_path, *argv, config=None, name="out"):
    out = tmp_path / name
    args = list(argv) + ["--out", str(out)]
    if config is not None:
        p = tmp_path / f"{name}.json"
        p.write_text(config if isinstance(config, str) else json.dumps(config))
        args += ["--config", str(p)]
    return cli.main(args), out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_blasius_command(tmp_path):
    code, out = _run(tmp_path, "blasius")
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["blasius.csv", "manifest.json", "plot_data.csv",
                                                     "summary.json"]
    s = json.loads((out / "summary.json").read_text())
    assert s["shoot_value"] == pytest.approx(0.4696, abs=1e-4)
    rows = _rows(out / "blasius.csv")
    assert rows[0] == ["eta", "f", "fp", "fpp"]
    assert float(rows[-1][2]) == pytest.approx(1.0, abs=1e-9)
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "ok" and m["grid_scale"] == 0.25 and m["seed"] == 42


def test_config_file_dispatch(tmp_path):
    code, out = _run(tmp_path, config={"command": "blasius", "params": {"n": 512}, "seed": 3})
    assert code == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["command"] == "blasius" and m["params"]["n"] == 512 and m["seed"] == 3


@pytest.mark.parametrize("config", [
    "{not json",
    {"command": "blasius", "params": {"n": 512, "colour": 1}},
    {"command": "blasius", "extra": 1},
    {"command": "blasius", "params": {"n": "many"}},
    {"command": "euler", "params": {"shear": {"family": "parabola"}}},
    {"command": "verify-all", "params": {"criteria": [16]}},
    {"command": "residual-sweep", "params": {"layers": {"bogus": 1}}},
])
def test_bad_config_exit_2_and_no_files(tmp_path, config):
    code, out = _run(tmp_path, config=config)
    assert code == 2
    assert not out.exists()


def test_command_mismatch(tmp_path):
    code, out = _run(tmp_path, "euler", config={"command": "blasius"})
    assert code == 2 and not out.exists()


def test_resolve_defaults():
    rc = cli.resolve("degree", None, None)
    assert rc["seed"] == 42
    assert rc["params"]["coercivity"]["trials"] == 200
    with pytest.raises(ConfigError):
        cli.resolve(None, {}, None)


def test_numerical_failure_exit_3_with_partial_bundle(tmp_path):
    code, out = _run(tmp_path, "blasius", config={"params": {"eta_max": 2.0}})
    assert code == 3
    f = json.loads((out / "failure.json").read_text())
    assert f["type"] == "ShootingError"
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "failed"


def test_verify_all_stage_failure(tmp_path, monkeypatch):
    def boom():
        raise ShootingError("no bracket")

    monkeypatch.setitem(acc.CRITERIA, 2, boom)
    code, out = _run(tmp_path, "verify-all", config={"params": {"criteria": [2, 3, 8]}})
    assert code == 3
    f = json.loads((out / "failure.json").read_text())
    assert f["criterion"] == 2 and f["stage"] == "blasius"
    s = json.loads((out / "summary.json").read_text())
    # criterion 2 runs first in its stage, so nothing completed before it
    assert s["criteria"] == [] and not s["all_passed"]


def test_emit_plot_data_empty_is_header_only():
    b = cli.Bundle()
    cli.emit_plot_data(b, [])
    assert b.files["plot_data.csv"] == b"series,x,y\n"


def test_sweep_plot_rows_sorted():
    rows = cli.sweep_plot_rows([1e-3, 4e-3, 2e-3], {"b": [1, 2, 3], "a": [4, 5, 6]})
    assert [r[0] for r in rows] == [4e-3, 4e-3, 2e-3, 2e-3, 1e-3, 1e-3]
    assert [r[1] for r in rows[:2]] == ["a", "b"]
    assert rows[0][2] == 5


def test_bundle_float_round_trip():
    b = cli.Bundle()
    vals = [0.1, 1 / 3, np.float64(2.0) ** -40]
    b.csv("t.csv", ["v"], ([v] for v in vals))
    back = [float(r[0]) for r in csv.reader(b.files["t.csv"].decode().splitlines()[1:])]
    assert back == [float(v) for v in vals]


def test_residual_sweep_csv_matches_summary(tmp_path):
    cfg = {"params": {"eps_list": [4e-3, 2e-3, 1e-3], "h": 0.05}}
    code, out = _run(tmp_path, "residual-sweep", config=cfg)
    assert code == 0
    rows = _rows(out / "residual.csv")
    assert rows[0] == ["eps", "r_u_l2", "r_u_sup", "r_v_l2", "r_div", "slope"]
    eps = np.array([float(r[0]) for r in rows[1:]])
    sup = np.array([float(r[2]) for r in rows[1:]])
    slope = np.polyfit(np.log(eps), np.log(sup), 1)[0]
    s = json.loads((out / "summary.json").read_text())
    assert slope == pytest.approx(s["slopes"]["r_u_sup"], abs=1e-12)
    assert float(rows[1][5]) == s["slopes"]["r_u_sup"]
    plot = _rows(out / "plot_data.csv")
    assert plot[0] == ["eps", "metric", "value"]
    e = [float(r[0]) for r in plot[1:]]
    assert e == sorted(e, reverse=True)
    assert len(_rows(out / "inviscid.csv")) == 4


def test_prandtl_with_trace_file(tmp_path):
    nx = cli.scaled(41)
    traces = {"u1e": [0.0] * nx, "u1e_x": [0.0] * nx, "v1e_Y": [0.0] * nx}
    tp = tmp_path / "traces.json"
    tp.write_text(json.dumps(traces))
    code, out = _run(tmp_path, "prandtl", config={"params": {"euler_traces": str(tp)}})
    assert code == 0
    r = json.loads((out / "residual.json").read_text())
    assert r["traces_from_file"]
    up = _rows(out / "up.csv")
    assert len(up) == nx + 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"u1e": [0.0] * nx}))
    code, out2 = _run(tmp_path, "prandtl", config={"params": {"euler_traces": str(bad)}}, name="o2")
    assert code == 2 and not out2.exists()


@pytest.mark.parametrize("command", ["euler", "degree", "solve-u0"])
def test_commands_write_manifest(tmp_path, command):
    code, out = _run(tmp_path, command)
    assert code == 0
    m = json.loads((out / "manifest.json").read_text())
    assert sorted(p.name for p in out.iterdir()) == m["files"]


def test_runs_are_byte_identical(tmp_path):
    a = _run(tmp_path, "degree", name="a")[1]
    b = _run(tmp_path, "degree", name="b")[1]
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
