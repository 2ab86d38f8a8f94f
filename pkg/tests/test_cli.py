import csv
import io
import json
from importlib import resources

import pytest

from cbmcause.cli import ConfigError, StageError, load_config, main, normalize_config, run_pipeline

SMALL = {"seed": 1, "data": {"preset": "FIG7", "n": 400}, "regressors": ["Linear"], "explain": {"max_rows": 30}}


def _write_config(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_pipeline_writes_every_report(tmp_path):
    rec = run_pipeline(SMALL, tmp_path / "out")
    out = tmp_path / "out"
    for name in rec["files"] + ["run.json"]:
        assert (out / name).is_file()
    assert set(rec["files"]) == {"data.csv", "meta.json", "dag.edges", "pag.edges", "trace.jsonl", "roles.json",
                                 "shap.json", "trends.csv", "trends.txt", "metrics.csv", "metrics.txt"}
    assert rec["output"] == "q_g"
    assert json.loads((out / "roles.json").read_text())["treatment"] == "Q_p"
    assert (out / "metrics.txt").read_text().splitlines()[1].startswith("LR | ")
    run = json.loads((out / "run.json").read_text())
    assert run["config"]["discover"]["alpha"] == 0.05
    assert set(run["versions"]) >= {"cbmcause", "numpy", "backend"}


def test_pipeline_is_byte_deterministic(tmp_path):
    run_pipeline(SMALL, tmp_path / "a")
    run_pipeline(SMALL, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_pipeline_subcommand_from_config_file(tmp_path, capsys):
    cfg = _write_config(tmp_path, {**SMALL, "stages": ["synth", "standardize", "discover"]})
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "pag.edges").is_file()
    assert not (tmp_path / "o" / "metrics.csv").exists()
    assert "pag.edges" in capsys.readouterr().out


def test_relative_paths_resolve_against_config_dir(tmp_path):
    run_pipeline({**SMALL, "stages": ["synth"]}, tmp_path / "gen")
    sub = tmp_path / "cfgdir"
    sub.mkdir()
    cfg = {"data": {"csv": "../gen/data.csv", "meta": "../gen/meta.json"},
           "stages": ["load", "standardize", "discover"], "out": "res"}
    p = _write_config(sub, cfg)
    run_pipeline(p)
    assert (sub / "res" / "pag.edges").is_file()


@pytest.mark.parametrize("cmd", ["synth", "discover", "compare", "explain"])
def test_subcommands(tmp_path, cmd):
    args = [cmd, "--n", "300", "--seed", "2", "--out", str(tmp_path)]
    if cmd in ("compare", "explain"):
        args += ["--regressors", "Linear"]
    assert main(args) == 0
    expected = {"synth": "data.csv", "discover": "pag.edges", "compare": "metrics.csv", "explain": "trends.csv"}[cmd]
    assert (tmp_path / expected).is_file()


def test_bundled_well_table_with_role_file(tmp_path):
    data = resources.files("cbmcause") / "data"
    args = ["explain", "--data", str(data / "cbm21.csv"), "--meta", str(data / "cbm21.meta.json"),
            "--roles", str(data / "cbm21.roles.json"), "--regressors", "Linear", "--out", str(tmp_path)]
    assert main(args) == 0
    roles = json.loads((tmp_path / "roles.json").read_text())
    assert roles["treatment"] == "Liq_Prep" and roles["output"] == "Gas_Prod"
    header = (tmp_path / "trends.csv").read_text().splitlines()[1]
    assert header == "feature,Linear"


def test_missing_input_file_is_a_config_error(tmp_path, capsys):
    assert main(["discover", "--data", str(tmp_path / "x.csv"), "--meta", str(tmp_path / "m.json"),
                 "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        run_pipeline({"data": {"csv": "nope.csv", "meta": "nope.json"}, "stages": ["load"]}, tmp_path)


def test_config_validation():
    with pytest.raises(ConfigError):
        normalize_config({"data": {"preset": "FIG7"}, "stages": ["synth", "fly"]})
    with pytest.raises(ConfigError):
        normalize_config({"data": {"preset": "FIG7"}, "stages": ["discover", "synth"]})
    with pytest.raises(ConfigError):
        normalize_config({"data": {"preset": "FIG7"}, "stages": ["standardize"]})
    with pytest.raises(ConfigError):
        normalize_config({"stages": ["synth"]})
    with pytest.raises(ConfigError):
        normalize_config({"data": {"preset": "FIG7"}, "discover": {"alpha": 2.0}})
    with pytest.raises(ConfigError):
        normalize_config({"data": {"preset": "FIG7"}, "regressors": ["Ridge"]})
    with pytest.raises(ConfigError):
        normalize_config({"data": {"preset": "FIG7"}, "explain": {"method": "kernel"}})
    with pytest.raises(ConfigError):
        normalize_config({"data": {"preset": "FIG7"}, "compare": {"test_fraction": 1.5}})
    cfg = normalize_config({"data": {"preset": "fig7"}})
    assert cfg["data"] == {"preset": "FIG7", "n": 2000}
    assert cfg["discover"]["on_conflict"] == "skip"


def test_stage_failure_exits_nonzero(tmp_path, capsys):
    # no engineering variable in this preset, so role selection fails
    cfg = _write_config(tmp_path, {"data": {"preset": "FIG8B", "n": 200}, "regressors": ["Linear"]})
    with pytest.raises(StageError) as exc:
        run_pipeline(cfg, tmp_path / "o")
    assert exc.value.stage == "roles"
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "roles" in capsys.readouterr().err


def test_load_config_rejects_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_auto_explain_method_switches_on_width():
    from cbmcause.cli import AUTO_EXACT_MAX_FEATURES, _explain_method

    assert _explain_method("auto", AUTO_EXACT_MAX_FEATURES) == "exact"
    assert _explain_method("auto", AUTO_EXACT_MAX_FEATURES + 1) == "sampled"
    assert _explain_method("exact", 30) == "exact"
    assert normalize_config({"data": {"preset": "FIG7"}})["explain"]["method"] == "auto"
    with pytest.raises(ConfigError):
        normalize_config({"data": {"preset": "FIG7"}, "explain": {"n_perm": 0}})


def test_target_left_raw_unless_flag_set(tmp_path):
    raw = run_pipeline(SMALL, tmp_path / "raw")
    scaled = run_pipeline({**SMALL, "standardize": {"target": True}}, tmp_path / "scaled")
    assert raw["config"]["standardize"] == {"target": False}
    assert scaled["config"]["standardize"] == {"target": True}
    rows = {}
    for name in ("raw", "scaled"):
        text = (tmp_path / name / "metrics.csv").read_text().split("\n", 1)[1]
        rows[name] = next(csv.DictReader(io.StringIO(text)))
    # a linear fit is scale equivariant: R2 agrees, errors carry the target's units
    assert float(rows["raw"]["r2_test"]) == pytest.approx(float(rows["scaled"]["r2_test"]), abs=1e-9)
    assert float(rows["raw"]["mae_test"]) != pytest.approx(float(rows["scaled"]["mae_test"]), rel=1e-3)
