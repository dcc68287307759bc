"""Runner contract: strict config parsing, exit codes, CSV format,
flag overrides, sweep consolidation, reproducibility."""

import json
import os
import subprocess
import sys

import pytest

from residuelab.cli import (
    ConfigError,
    default_config,
    load_config,
    main,
    validate_config,
)


def run_cli(args, env=None):
    e = dict(os.environ)
    if env:
        e.update(env)
    return subprocess.run(
        [sys.executable, "-m", "residuelab.cli"] + args,
        capture_output=True, text=True, env=e,
    )


# ---------------------------------------------------------------------------
# config handling


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema_version": 1, "pipelin": "connes"}))
    with pytest.raises(ConfigError, match="pipelin"):
        load_config(str(path), {})


def test_unknown_nested_key_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema_version": 1, "symbol": {"kid": "zero"}}))
    with pytest.raises(ConfigError, match="symbol.*kid"):
        load_config(str(path), {})


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n "pipeline": "connes",\n BROKEN\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(str(path), {})


def test_schema_version_enforced():
    cfg = default_config()
    cfg["schema_version"] = 99
    with pytest.raises(ConfigError, match="schema_version"):
        validate_config(cfg)


def test_range_validation():
    cfg = default_config()
    cfg["d"] = 4
    with pytest.raises(ConfigError, match="d must be"):
        validate_config(cfg)
    cfg = default_config()
    cfg["K"] = 0
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_flags_override_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema_version": 1, "pipeline": "connes", "K": 64}))
    cfg = load_config(str(path), {"K": 32})
    assert cfg["K"] == 32
    assert cfg["pipeline"] == "connes"


def test_empty_sweep_list_is_config_error():
    cfg = default_config()
    cfg["pipeline"] = "sweep"
    cfg["sweep"] = {"pipeline": "connes", "K_list": []}
    with pytest.raises(ConfigError, match="K_list"):
        validate_config(cfg)


def test_cli_exit_1_on_config_error(tmp_path):
    res = run_cli(["--set", "tolerances.bogus=1", "--pipeline", "connes"])
    assert res.returncode == 1
    assert "bogus" in res.stderr


# ---------------------------------------------------------------------------
# pipelines through the CLI


def test_residue_zero_symbol_csv(tmp_path):
    csv = tmp_path / "z.csv"
    res = run_cli([
        "--pipeline", "residue", "--symbol-kind", "zero", "--d", "1",
        "--csv", str(csv),
    ])
    assert res.returncode == 0
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "n,value_re,value_im"
    for line in lines[1:]:
        n, re, im = line.split(",")
        assert int(n) >= 2
        assert float(re) == 0.0 and float(im) == 0.0


def test_nonmeasurable_pipeline_band(tmp_path):
    jsn = tmp_path / "q.json"
    res = run_cli(["--pipeline", "nonmeasurable", "--d", "1", "--json", str(jsn)])
    assert res.returncode == 0
    rep = json.loads(jsn.read_text())
    assert rep["verdict"]["passed"] is True
    assert rep["verdict"]["measurable"] is False
    assert rep["verdict"]["band_width"] >= 1.5
    assert rep["schema_version"] == 1


def test_connes_pipeline_exit_codes(tmp_path):
    jsn = tmp_path / "c.json"
    res = run_cli(["--pipeline", "connes", "--d", "1", "--K", "256", "--json", str(jsn)])
    assert res.returncode == 0
    rep = json.loads(jsn.read_text())
    assert rep["relative_gap"] < 0.10
    # absurdly tight tolerance makes the verdict fail -> exit 2
    res2 = run_cli([
        "--pipeline", "connes", "--d", "1", "--K", "64",
        "--set", "tolerances.relative_gap=1e-6",
    ])
    assert res2.returncode == 2


def test_integrate_pipeline(tmp_path):
    jsn = tmp_path / "i.json"
    res = run_cli([
        "--pipeline", "integrate", "--d", "1", "--K", "32", "--json", str(jsn),
        "--set", "symbol.kind=product-bump",
    ])
    assert res.returncode == 0
    rep = json.loads(jsn.read_text())
    assert rep["verdict"]["relative_gap"] <= 0.02


def test_budget_violation_exit_1():
    res = run_cli(["--pipeline", "connes", "--K", "512"],
                  env={"RESIDUELAB_MATRIX_BUDGET": "100"})
    assert res.returncode == 1
    assert "budget" in res.stderr.lower()


def test_budget_flag_overrides_env():
    res = run_cli(["--pipeline", "connes", "--K", "48", "--budget", "200"],
                  env={"RESIDUELAB_MATRIX_BUDGET": "10"})
    assert res.returncode == 0


def test_csv_float_format_17_digits(tmp_path):
    csv = tmp_path / "c.csv"
    res = run_cli(["--pipeline", "connes", "--d", "1", "--K", "48", "--csv", str(csv)])
    assert res.returncode == 0
    lines = csv.read_text().strip().splitlines()[1:]
    value = lines[-1].split(",")[1]
    # 17 significant digits round-trip float64 exactly
    assert float(value) == float(f"{float(value):.17g}")
    assert "," not in value and "." in value


# ---------------------------------------------------------------------------
# sweep


def test_sweep_consolidated_csv_and_summary(tmp_path):
    csv = tmp_path / "s.csv"
    jsn = tmp_path / "s.json"
    res = run_cli([
        "--pipeline", "sweep", "--k-list", "24,48,96",
        "--csv", str(csv), "--json", str(jsn),
    ])
    assert res.returncode == 0
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "K,n,value_re,value_im"
    ks = sorted({int(l.split(",")[0]) for l in lines[1:]})
    assert ks == [24, 48, 96]
    # rows flushed in K order
    kcol = [int(l.split(",")[0]) for l in lines[1:]]
    assert kcol == sorted(kcol)
    rep = json.loads(jsn.read_text())
    assert [s["K"] for s in rep["summary"]] == [24, 48, 96]
    gaps = [s["gap"] for s in rep["summary"]]
    # convergence: gap shrinks with K up to 20% noise allowance
    assert gaps[-1] <= gaps[0] * 1.2


def test_sweep_single_K_matches_run(tmp_path):
    csv_run = tmp_path / "run.csv"
    csv_sweep = tmp_path / "sweep.csv"
    assert run_cli(["--pipeline", "connes", "--K", "48", "--csv", str(csv_run)]).returncode == 0
    assert run_cli([
        "--pipeline", "sweep", "--k-list", "48", "--csv", str(csv_sweep),
    ]).returncode == 0
    run_rows = csv_run.read_text().strip().splitlines()[1:]
    sweep_rows = [l.split(",", 1)[1] for l in csv_sweep.read_text().strip().splitlines()[1:]]
    assert run_rows == sweep_rows


def test_sweep_worker_pool_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli(["--pipeline", "sweep", "--k-list", "16,32,48", "--workers", "3", "--csv", str(a)])
    run_cli(["--pipeline", "sweep", "--k-list", "16,32,48", "--workers", "1", "--csv", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_sweep_per_K_failure_recorded(tmp_path):
    jsn = tmp_path / "s.json"
    res = run_cli([
        "--pipeline", "sweep", "--k-list", "16,2000", "--json", str(jsn),
        "--budget", "200",
    ])
    assert res.returncode == 2  # one K failed, sweep continued
    rep = json.loads(jsn.read_text())
    assert "2000" in rep["errors"]
    assert any(s["K"] == 16 and "error" not in s for s in rep["summary"])


# ---------------------------------------------------------------------------
# determinism


def test_same_config_byte_identical_csv(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--pipeline", "connes", "--d", "1", "--K", "64", "--seed", "7"]
    assert run_cli(args + ["--csv", str(a)]).returncode == 0
    assert run_cli(args + ["--csv", str(b)]).returncode == 0
    assert a.read_bytes() == b.read_bytes()


def test_in_process_main_entrypoint(tmp_path):
    csv = tmp_path / "m.csv"
    code = main([
        "--pipeline", "residue", "--symbol-kind", "zero", "--csv", str(csv),
    ])
    assert code == 0
    assert csv.exists()
