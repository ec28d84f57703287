import csv
import json
from pathlib import Path

import numpy as np
import pytest

from teamsort import cli
from teamsort.config import load_scenario, parse_scenario
from teamsort.dist import BinarySkill, Uniform
from teamsort.economy import Binary
from teamsort.errors import ConfigError

SCN = Path(__file__).resolve().parent.parent / "scenarios"

BINARY = """\
name: t
production:
  variant: binary
  params: {F_ll: 0, F_hl: 2, F_hh: 3}
traits:
  variant: binary
  params:
    G_l: {kind: uniform, a: 0, b: 1}
    G_h: {kind: uniform, a: 0, b: 1}
    p: 0.4
"""


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# config ---------------------------------------------------------------------


def test_parse_reference():
    scn = load_scenario(SCN / "binary_reference.yaml")
    assert scn.f == Binary(0.0, 2.0, 3.0)
    assert repr(scn.traits) == repr(BinarySkill(Uniform(0.0, 1.0), Uniform(0.0, 1.0)))
    assert scn.analysis.outsourcing_cost == 0.2
    assert scn.sbtc.levels == (0.0, 1.0)


def test_binary_share_error_names_line():
    with pytest.raises(ConfigError) as e:
        parse_scenario(BINARY, "x.yaml")
    assert e.value.line == 10
    assert "p = 0.5" in str(e.value) and "x.yaml:10" in str(e.value)


def test_unknown_key_rejected():
    text = BINARY.replace("    p: 0.4\n", "") + "colour: blue\n"
    with pytest.raises(ConfigError) as e:
        parse_scenario(text)
    assert "colour" in str(e.value)


def test_yaml_syntax_error_line():
    text = BINARY.replace("    p: 0.4\n", "") + "analysis: {n: [1, 2\n"
    with pytest.raises(ConfigError) as e:
        parse_scenario(text)
    assert e.value.line is not None and e.value.line >= 10


def test_decimal_strings_match_numbers():
    a = parse_scenario(BINARY.replace("    p: 0.4\n", "").replace("F_hl: 2", "F_hl: '2.1'"))
    b = parse_scenario(BINARY.replace("    p: 0.4\n", "").replace("F_hl: 2", "F_hl: 2.1"))
    assert a.f.F_hl == b.f.F_hl == 2.1


def test_bad_decimal_string():
    with pytest.raises(ConfigError, match="decimal"):
        parse_scenario(BINARY.replace("    p: 0.4\n", "").replace("F_hl: 2", "F_hl: 'two'"))


def test_sbtc_must_increase():
    text = BINARY.replace("    p: 0.4\n", "") + "analysis:\n  sbtc: {levels: [1, 0]}\n"
    with pytest.raises(ConfigError, match="increasing") as e:
        parse_scenario(text)
    assert e.value.line == 11


def test_odd_oracle_size():
    text = BINARY.replace("    p: 0.4\n", "") + "analysis:\n  oracle_sizes: [12, 7]\n"
    with pytest.raises(ConfigError, match="even"):
        parse_scenario(text)


def test_shipped_scenarios_parse():
    files = sorted(SCN.glob("*.yaml"))
    assert len(files) >= 5
    for p in files:
        load_scenario(p)


# cli -----------------------------------------------------------------------


def run(tmp_path, cmd, scenario, *extra):
    out = tmp_path / cmd
    code = cli.main([cmd, "--scenario", str(scenario), "--out", str(out), *extra])
    return code, out


def test_solve_binary_reference(tmp_path):
    code, out = run(tmp_path, "solve", SCN / "binary_reference.yaml", "--n", "20000")
    assert code == 0
    types = (out / "types.csv").read_text().splitlines()
    assert "h_cross,1.0,0.41666666666666663,1.375,1.375,2.125" in types
    summary = {r["key"]: r["value"] for r in _rows(out / "summary.csv")}
    assert abs(float(summary["ybar"]) - 1 / 6) < 1e-15
    man = json.loads((out / "manifest.json").read_text())
    assert man["budget_error"] < 1e-12 and "types.csv" in man["files"]


def test_solve_additive_origin_wage(tmp_path):
    code, out = run(tmp_path, "solve", SCN / "additive_uniform.yaml", "--n", "2000")
    assert code == 0
    rows = _rows(out / "wages.csv")
    origin = [r for r in rows if float(r["x1"]) == 0.0 and float(r["x2"]) == 0.0]
    assert abs(float(origin[0]["w"]) - (0.5 - np.log(3) / 4)) < 1e-12


def test_outputs_are_byte_identical(tmp_path):
    _, a = run(tmp_path / "a", "solve", SCN / "binary_reference.yaml", "--n", "2000")
    _, b = run(tmp_path / "b", "solve", SCN / "binary_reference.yaml", "--n", "2000")
    for p in a.iterdir():
        assert p.read_bytes() == (b / p.name).read_bytes(), p.name


def test_verify_reference_passes(tmp_path):
    code, out = run(tmp_path, "verify", SCN / "binary_reference.yaml")
    assert code == 0
    rep = json.loads((out / "verify.json").read_text())
    assert rep["passed"] and rep["max_surplus_gap"] <= 1e-9
    assert all(r["enumeration_agrees"] for r in rep["instances"])


def test_verify_counterexample_fails(tmp_path):
    code, out = run(tmp_path, "verify", SCN / "common_rankings_counterexample.yaml")
    assert code == 1
    rep = json.loads((out / "verify.json").read_text())
    assert not rep["common_rankings"]["passed"]


def test_bad_config_exit(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text(BINARY)
    code, _ = run(tmp_path, "solve", p)
    assert code == 2


def test_unsupported_exit(tmp_path):
    p = tmp_path / "mixed.yaml"
    p.write_text(BINARY.replace("variant: binary\n  params:\n    G_l", "variant: product\n  params:\n    x1")
                 .replace("    G_h", "    x2").replace("    p: 0.4\n", ""))
    code, _ = run(tmp_path, "solve", p, "--n", "1000")
    assert code == 3


def test_sweep(tmp_path):
    code, out = run(tmp_path, "sweep", SCN / "binary_reference.yaml")
    assert code == 0
    y = [float(r["y_o"]) for r in _rows(out / "sweep.csv")]
    assert len(y) == 21 and np.all(np.diff(y) >= 0)
    assert abs(y[0] - 11 / 30) < 1e-12 and abs(y[-1] - 0.42) < 1e-12


def test_sweep_needs_cost(tmp_path):
    code, _ = run(tmp_path, "sweep", SCN / "additive_uniform.yaml")
    assert code == 3


def test_report_supermodular(tmp_path):
    code, out = run(tmp_path, "report", SCN / "binary_supermodular.yaml", "--n", "20000")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["welfare_gain_share"] == 1.0
    assert rep["identity_error"] < 1e-12


def test_report_additive_benchmark(tmp_path):
    code, out = run(tmp_path, "report", SCN / "additive_uniform.yaml", "--n", "20000")
    rep = json.loads((out / "report.json").read_text())
    assert code == 0 and rep["var_w_B"] - rep["var_w_S"] == 0.0


def test_out_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    code = cli.main(["report", "--scenario", str(SCN / "additive_uniform.yaml"), "--n", "1000"])
    assert code == 0 and (tmp_path / "env" / "report.json").exists()


def test_odd_n_is_config_error(tmp_path):
    code, _ = run(tmp_path, "report", SCN / "additive_uniform.yaml", "--n", "1001")
    assert code == 2
