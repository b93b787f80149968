import json
import math

import pytest

from blowlab.experiments import ConfigError, effective_config, emit_report, run_experiment
from blowlab.experiments.cli import main
from blowlab.experiments.config import apply_override, parse_override
from blowlab.experiments.results import Table, format_value, write_csv


def _csv_rows(path):
    text = path.read_bytes().decode()
    assert "\r" not in text and text.endswith("\n")
    lines = text.rstrip("\n").split("\n")
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def test_parse_override_values():
    assert parse_override("a.b=1.5") == (["a", "b"], 1.5)
    assert parse_override("x=[1, 2]") == (["x"], [1, 2])
    assert parse_override("name=gaussian-bump") == (["name"], "gaussian-bump")
    assert parse_override("flag=true") == (["flag"], True)
    with pytest.raises(ConfigError):
        parse_override("novalue")
    with pytest.raises(ConfigError):
        parse_override("a..b=1")


def test_apply_override_creates_nested_keys():
    cfg = {"forcing": {"kind": "zero"}}
    apply_override(cfg, ["forcing", "eps"], 0.2)
    apply_override(cfg, ["tolerances", "slope"], 0.1)
    assert cfg == {"forcing": {"kind": "zero", "eps": 0.2}, "tolerances": {"slope": 0.1}}


def test_effective_config_precedence():
    cfg = effective_config("picard", {"p": 3.0, "grid": {"points": 101}}, ["p=2.5", "initial.amplitude=0.3"])
    assert cfg["p"] == 2.5
    assert cfg["grid"] == {"half_width": 8.0, "points": 101}
    assert cfg["initial"] == {"kind": "gaussian", "amplitude": 0.3}
    assert cfg["experiment"] == "picard" and cfg["workers"] >= 1


def test_effective_config_rejects_mismatch_and_unknown():
    with pytest.raises(ConfigError):
        effective_config("picard", {"experiment": "simulate"})
    with pytest.raises(ConfigError):
        effective_config("nonsense")
    with pytest.raises(ConfigError):
        effective_config("picard", {"system": {"tag": "engel", "n": 1}})


def test_format_value_17_digits():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(3) == "3"
    assert format_value(None) == ""
    assert format_value("a,b") == '"a,b"'
    assert format_value(math.inf) == "inf"


def test_write_csv_rejects_ragged_rows(tmp_path):
    t = Table(["a", "b"])
    with pytest.raises(ValueError):
        t.add(1)
    t.add(1, 2.5)
    write_csv(tmp_path / "x.csv", t)
    assert (tmp_path / "x.csv").read_bytes() == b"a,b\n1,2.5\n"


def test_exponent_table_cli(tmp_path, capsys):
    out = tmp_path / "exp"
    assert main(["exponent-table", "--out", str(out)]) == 0
    report = capsys.readouterr().out
    header, rows = _csv_rows(out / "results.csv")
    assert header == ["quantity", "kind", "parameter", "exact", "value"]
    thresholds = {r[1]: r[3] for r in rows if r[0] == "threshold"}
    assert thresholds == {"parabolic": "3/2", "constant": "2", "grushin": "2", "engel": "7/5"}
    check_lines = [line for line in report.splitlines() if line.startswith(("PASS", "FAIL"))]
    assert check_lines and all(line.startswith("PASS") for line in check_lines)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["summary"]["all_passed"] and manifest["config"]["experiment"] == "exponent-table"
    assert {"results.csv", "report.txt", "manifest.json"} <= set(manifest["files"])


def test_functional_scan_cli_slope(tmp_path):
    out = tmp_path / "fs"
    assert main(["functional-scan", "--out", str(out)]) == 0
    header, rows = _csv_rows(out / "results.csv")
    assert header == ["T", "I_delta", "I_t", "F"] and len(rows) == 5
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["details"]["slope"] == pytest.approx(-1.0, abs=1e-6)
    svg = (out / "plots" / "functional_scan.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg


def test_config_file_and_set(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "operator-check", "system": {"tag": "engel", "n": 3}, "grid": {"half_width": 2.0, "points": 5}}))
    out = tmp_path / "op"
    rc = main(["operator-check", "--config", str(cfg), "--set", "export_operator=true", "--out", str(out)])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["system"] == {"tag": "engel", "n": 3}
    assert (out / "operator.coo").exists()
    _, rows = _csv_rows(out / "results.csv")
    assert len(rows) == 3


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["picard", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["picard", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_rerun_is_byte_identical(tmp_path):
    cfg = effective_config("kernel-check", {"grid": {"points": 101}, "workers": 1})
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_partial_sweep_failure_is_recorded(tmp_path):
    cfg = effective_config(
        "blowup-scan",
        {
            "system": {"tag": "euclidean", "n": 1},
            "grid": {"half_width": 12.0, "points": 61},
            "forcing": {"kind": "gaussian-bump"},
            "eps": [0.5, 1.0, -1.0],
            "dt0": 0.05,
            "horizon": 60.0,
            "workers": 2,
        },
    )
    m = run_experiment(cfg, tmp_path / "bs")
    assert not m["summary"]["complete"] and not m["summary"]["all_passed"]
    assert len(m["errors"]) == 1 and m["errors"][0]["point"] == -1.0
    report = (tmp_path / "bs" / "report.txt").read_text()
    assert "FAIL  point 0 (-1)" in report and "partial completion" in report
    _, rows = _csv_rows(tmp_path / "bs" / "results.csv")
    assert rows[0][-1] == "error" and len(rows) == 3


def test_cli_exit_nonzero_on_failed_check(tmp_path):
    # the logarithmic family misses its log-power slope (see README, known deviations)
    args = ["functional-scan", "--set", "family=critical-log", "--set", 'system={"tag": "euclidean", "n": 3}']
    args += ["--set", "p=1.5", "--set", "R=[100, 1000, 10000, 100000, 1000000]", "--set", "tolerances.slope=0.15"]
    rc = main(args + ["--out", str(tmp_path / "f")])
    assert rc == 1
    report = (tmp_path / "f" / "report.txt").read_text()
    assert "FAIL  slope = theta: measured" in report and "theory -4" in report


def test_emit_report_fail_line_names_values():
    manifest = {
        "experiment": "functional-scan",
        "version": "0",
        "wall_time_s": 0.1,
        "checks": [{"name": "slope = theta", "measured": -0.9, "expected": -1.0, "tolerance": 0.05, "passed": False, "note": ""}],
        "errors": [],
        "summary": {"total": 1, "passed": 0, "all_passed": False, "complete": True},
    }
    text = emit_report(manifest)
    assert "FAIL  slope = theta: measured -0.9, theory -1, tolerance 0.05" in text
    assert "NOT ALL PASS" in text


@pytest.mark.parametrize(
    "kind,overrides",
    [
        ("kernel-check", ["grid.points=201", "probes=2"]),
        ("picard", ["grid.points=101"]),
        ("simulate", ["grid.points=81", "horizon=0.5", "record=[0.25, 0.5]"]),
        ("weak-residual", ["ladder=[[39, 16], [79, 32], [159, 64]]"]),
    ],
)
def test_subcommands_run_and_pass(tmp_path, kind, overrides):
    args = [kind, "--out", str(tmp_path / kind)]
    for o in overrides:
        args += ["--set", o]
    assert main(args) == 0
    m = json.loads((tmp_path / kind / "manifest.json").read_text())
    assert m["summary"]["complete"]
    for f in m["files"]:
        assert (tmp_path / kind / f).exists()
