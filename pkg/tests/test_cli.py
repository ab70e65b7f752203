"""Command-line interface: config validation, reports, exit codes."""

import csv
import io
import json
import sys

import numpy as np
import pytest

from s4is.cli import (CONFIG_SCHEMA, build_report, history_rows, main,
                      report_csv_rows, report_json, validate_config)
from s4is.errors import ConfigError


def _config(tmp_path, payload):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return str(path)


BASE = {"problem": {"builtin": {"name": "example1"}},
        "method": "s4is", "seed": 7, "replicates": 1}


def test_run_byte_identical_for_fixed_seed(tmp_path, capsys):
    cfg = _config(tmp_path, BASE)
    assert main(["run", "--config", cfg]) == 0
    first = capsys.readouterr().out
    assert main(["run", "--config", cfg]) == 0
    second = capsys.readouterr().out
    assert first == second
    report = json.loads(first)
    assert report["aggregate"]["mean_pf"] == pytest.approx(4.46e-3, rel=0.15)


def test_unknown_key_exits_2_without_evaluation(tmp_path, capsys):
    # the sentinel command would create a file if any evaluation happened
    sentinel = tmp_path / "touched"
    payload = {
        "problem": {"external": {
            "command": [sys.executable, "-c",
                        f"open({str(sentinel)!r}, 'w').close()"],
            "marginals": [{"kind": "normal", "mean": 0, "sd": 1}],
        }},
        "method": "form",
        "bogus": 1,
    }
    assert main(["run", "--config", _config(tmp_path, payload)]) == 2
    assert "invalid config" in capsys.readouterr().err
    assert not sentinel.exists()


def test_missing_config_file_exits_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


def test_runtime_failure_exits_3(tmp_path, capsys):
    payload = {
        "problem": {"external": {
            "command": [sys.executable, "-c", "import sys; sys.exit(1)"],
            "marginals": [{"kind": "normal", "mean": 0, "sd": 1},
                          {"kind": "normal", "mean": 0, "sd": 1}],
        }},
        "method": "form",
    }
    assert main(["run", "--config", _config(tmp_path, payload)]) == 3
    assert "analysis failed" in capsys.readouterr().err


def test_method_mcs_requires_block():
    with pytest.raises(ConfigError):
        validate_config({"problem": {"builtin": {"name": "example1"}},
                         "method": "mcs"})


def test_config_roundtrip_is_stable():
    cfg = dict(BASE, mcs={"n": 1000},
               s4is={"k_clusters": 3}, output={"format": "json"})
    validate_config(cfg)
    again = json.loads(json.dumps(cfg))
    validate_config(again)
    assert again == cfg


def test_schema_rejects_unknown_s4is_field():
    cfg = dict(BASE, s4is={"not_a_knob": 1})
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_report_csv_one_row_per_replicate():
    cfg = dict(BASE, method="mcs", mcs={"n": 10_000}, replicates=3)
    report = build_report(cfg)
    rows = report_csv_rows(report)
    assert rows[0] == ("replicate", "pf", "cov", "n_eval", "n_samples")
    assert len(rows) == 4


def test_history_rows_shape():
    report = build_report(BASE)
    rows = history_rows(report)
    assert rows[0] == ("stage", "iteration", "pf", "cov", "n_eval_cumulative")
    assert all(len(r) == 5 for r in rows)
    stage1 = [r for r in rows[1:] if r[0] == "stage1"]
    stage2 = [r for r in rows[1:] if r[0] == "stage2"]
    assert stage1 and stage2
    # last stage-2 pf equals the report's final pf
    assert float(stage2[-1][2]) == pytest.approx(
        report["replicates"][0]["pf"], rel=1e-12)
    # history lengths match what the stage reports recorded
    s1 = report["replicates"][0]["stages"]["stage1"]
    assert len(stage1) == len(s1["pf_history"])


def test_history_requires_stage_data(tmp_path):
    cfg = dict(BASE, method="mcs", mcs={"n": 1000})
    report = build_report(cfg)
    path = tmp_path / "report.json"
    path.write_text(report_json(report))
    assert main(["history", str(path)]) == 2


def test_history_cli_csv_output(tmp_path):
    cfg = _config(tmp_path, BASE)
    out = tmp_path / "report.json"
    assert main(["run", "--config", cfg, "--output", str(out)]) == 0
    hist = tmp_path / "history.csv"
    assert main(["history", str(out), "--output", str(hist)]) == 0
    with open(hist, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["stage", "iteration", "pf", "cov", "n_eval_cumulative"]
    assert len(rows) > 2


def test_seed_override_changes_result(tmp_path, capsys):
    cfg = _config(tmp_path, dict(BASE, method="mcs", mcs={"n": 20_000}))
    assert main(["run", "--config", cfg, "--seed", "1"]) == 0
    a = json.loads(capsys.readouterr().out)
    assert main(["run", "--config", cfg, "--seed", "2"]) == 0
    b = json.loads(capsys.readouterr().out)
    assert a["seed"] == 1 and b["seed"] == 2
    assert a["aggregate"]["mean_pf"] != b["aggregate"]["mean_pf"]


def test_schema_is_strict_everywhere():
    assert CONFIG_SCHEMA["additionalProperties"] is False
    assert CONFIG_SCHEMA["properties"]["problem"]["additionalProperties"] is False
