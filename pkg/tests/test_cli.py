"""Command-line interface."""

import json

import pytest

from slicemarket import benchmark_preset, save_scenario, instantiate, LoadModel
from slicemarket.cli import main


def test_solve_smoke(tmp_path, capsys):
    out = tmp_path / "solve"
    rc = main(["solve", "--seed", "3", "--scheme", "ss", "--out", str(out)])
    assert rc == 0
    assert (out / "solve_ss.json").exists()
    text = capsys.readouterr().out
    assert "per-provider utility" in text


def test_solve_from_scenario_file(tmp_path):
    spec = instantiate(benchmark_preset(n_cells=2), LoadModel(seed=1), 0)
    path = tmp_path / "scn.json"
    save_scenario(spec, path)
    rc = main(["solve", "--config", str(path), "--alpha", "2"])
    assert rc == 0


def test_dynamics_trace(tmp_path):
    out = tmp_path / "dyn"
    rc = main(["dynamics", "--seed", "1", "--out", str(out), "--iterations", "300"])
    assert rc == 0
    header = (out / "price_trace.csv").read_text().splitlines()[0]
    assert header == "iteration,cell,resource,price"


def test_experiment_with_config_file(tmp_path):
    cfg = {
        "instances": 1,
        "alphas": [1.0],
        "schemes": ["ss"],
        "out": str(tmp_path / "res"),
        "seed": 2,
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    rc = main(["experiment", "--config", str(path)])
    assert rc == 0
    assert (tmp_path / "res" / "results.csv").exists()


def test_experiment_flag_overrides(tmp_path):
    rc = main(
        [
            "experiment",
            "--instances", "1",
            "--alpha", "1",
            "--scheme", "ss",
            "--out", str(tmp_path / "res2"),
            "--seed", "2",
            "--jobs", "1",
        ]
    )
    assert rc == 0
    assert (tmp_path / "res2" / "summary.csv").exists()


def test_compare_smoke(tmp_path, capsys):
    rc = main(["compare", "--seed", "2", "--alpha", "1", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "compare.csv").exists()
    assert "PoA" in capsys.readouterr().out


def test_gen_writes_scenarios(tmp_path):
    out = tmp_path / "gen"
    rc = main(["gen", "--out", str(out), "--instances", "3", "--seed", "4"])
    assert rc == 0
    files = sorted(out.glob("scenario_*.json"))
    assert len(files) == 3
    doc = json.loads(files[0].read_text())
    assert doc["schema_version"] == 1
    assert {c["id"] for c in doc["cells"]} == {f"cell{i}" for i in range(1, 8)}


def test_alpha_inf_parsing(tmp_path):
    rc = main(["solve", "--seed", "1", "--alpha", "inf", "--scheme", "ss"])
    assert rc == 0


def test_bad_scheme_is_usage_error():
    with pytest.raises(SystemExit):
        main(["solve", "--scheme", "bogus"])


def test_solve_rejects_alpha_list(capsys):
    rc = main(["solve", "--seed", "1", "--alpha", "1,2"])
    assert rc == 2
    assert "single --alpha" in capsys.readouterr().err


def test_missing_config_reports_error(capsys):
    rc = main(["solve", "--config", "/nonexistent/path.json"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_bad_config_field_reports_error(tmp_path, capsys):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"alphas": "oops"}))
    rc = main(["experiment", "--config", str(path)])
    assert rc == 2
    assert "alphas" in capsys.readouterr().err
