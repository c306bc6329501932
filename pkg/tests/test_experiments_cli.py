import csv
import json
import os

import numpy as np
import pytest

from flatlpp.cli import main
from flatlpp.experiments import (OUTPUT_ENV, REGISTRY, ConfigError, ExperimentConfig, emit_plot, emit_plots,
                                 emit_report, list_experiments, report_json, run_experiment)

FAST = dict(experiment="exp_sup", N_samples=300, T=5.0, dt=0.02)


def test_every_criterion_is_registered():
    crit = sorted(e.criterion for e in list_experiments() if e.criterion is not None)
    assert crit == list(range(1, 13))


@pytest.mark.parametrize("data", [{"experiment": "nope"}, {**FAST, "dt": 0.0}, {**FAST, "drifts": (1.0, -1.0)},
                                  {**FAST, "seed": -1}, {**FAST, "tolerances": {"unknown": 0.1}},
                                  {**FAST, "tolerances": {"ks_D": 0.0}}])
def test_config_validation(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(data).resolved()


def test_config_rejects_unknown_keys_and_missing_name():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({**FAST, "colour": "red"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"n": 2})


def test_unknown_experiment_lists_registry():
    with pytest.raises(ConfigError, match="exp_sup"):
        run_experiment(ExperimentConfig("no_such_thing"))


def test_defaults_fill_unset_fields():
    d = REGISTRY["wall_vs_lpp"].defaults
    cfg = ExperimentConfig("wall_vs_lpp").resolved()
    assert (cfg.N_samples, cfg.T, cfg.dt) == (d["N_samples"], d["T"], d["dt"])
    assert ExperimentConfig("wall_vs_lpp", T=5.0).resolved().T == 5.0


def test_report_is_deterministic():
    a = run_experiment(ExperimentConfig.from_mapping(FAST))
    b = run_experiment(ExperimentConfig.from_mapping(FAST))
    assert report_json(a) == report_json(b)
    c = run_experiment(ExperimentConfig.from_mapping({**FAST, "seed": 1}))
    assert report_json(a) != report_json(c)


def test_density_normalization_passes():
    r = run_experiment(ExperimentConfig("density_normalization", n=3))
    assert r.passed
    assert r.metrics["max_discrepancy"] < 1e-10


def test_tolerance_override_decides_outcome():
    r = run_experiment(ExperimentConfig.from_mapping({**FAST, "tolerances": {"ks_D": 1e-6}}))
    assert not r.passed
    assert r.checks[0].tol == 1e-6


def test_json_report_round_trip(tmp_path):
    r = run_experiment(ExperimentConfig.from_mapping(FAST))
    path = emit_report(r, "json", str(tmp_path))
    data = json.loads(open(path).read())
    assert data == json.loads(report_json(r))
    assert set(data) == {"experiment", "criterion", "config", "metrics", "checks", "passed", "seed"}
    assert ExperimentConfig.from_mapping(data["config"]).resolved().to_dict() == data["config"]
    timing = json.loads((tmp_path / "timing.json").read_text())
    assert timing["experiment"] == "exp_sup" and timing["wall_clock"] >= 0


def test_csv_report_one_metric_per_row(tmp_path):
    r = run_experiment(ExperimentConfig.from_mapping(FAST))
    rows = list(csv.reader(open(emit_report(r, "csv", str(tmp_path)))))
    assert rows[0] == ["experiment", "metric", "value", "op", "tolerance", "passed"]
    assert sorted(row[1] for row in rows[1:]) == sorted(r.metrics)


def test_unwritable_directory(tmp_path):
    r = run_experiment(ExperimentConfig.from_mapping(FAST))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(r, "json", str(blocker / "sub"))
    with pytest.raises(ConfigError):
        emit_report(r, "xml", str(tmp_path))


def test_plots(tmp_path):
    rng = np.random.default_rng(0)
    p = emit_plot({"kind": "ecdf", "series": {"a": rng.normal(size=50), "b": rng.normal(size=60)}},
                  str(tmp_path / "ecdf.svg"))
    svg = open(p).read()
    assert svg.count("<path") >= 2
    x = np.linspace(-3, 3, 50)
    emit_plot({"kind": "hist", "data": rng.normal(size=200), "curve": (x, np.exp(-x * x / 2) / 2.5)},
              str(tmp_path / "hist.svg"))
    assert (tmp_path / "hist.svg").exists()
    for bad in ({"kind": "ecdf", "series": {}}, {"kind": "hist", "data": []}, {"kind": "pie"}):
        with pytest.raises(ConfigError):
            emit_plot(bad, str(tmp_path / "bad.svg"))


def test_report_plots(tmp_path):
    r = run_experiment(ExperimentConfig.from_mapping(FAST))
    paths = emit_plots(r, str(tmp_path))
    assert paths == [str(tmp_path / "plots" / "exp_sup_terminal.svg")]


def _cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_list(capsys):
    code, out, _ = _cli(["list"], capsys)
    assert code == 0
    assert "wall_vs_lpp" in out and "density_normalization" in out


def test_cli_verify_pass_and_fail(tmp_path, capsys):
    code, out, _ = _cli(["verify", "density_normalization", "--output-dir", str(tmp_path)], capsys)
    assert code == 0 and out.startswith("PASS")
    assert (tmp_path / "report.json").exists() and (tmp_path / "report.csv").exists()
    code, out, _ = _cli(["verify", "exp_sup", "--samples", "300", "--T", "5", "--dt", "0.02", "--tol", "ks_D=1e-6",
                         "--output-dir", str(tmp_path / "f")], capsys)
    assert code == 1 and out.startswith("FAIL")


@pytest.mark.parametrize("args", [[], ["verify"], ["verify", "nope"], ["frobnicate"],
                                  ["verify", "exp_sup", "--dt", "-1"], ["verify", "exp_sup", "--tol", "ks_D"],
                                  ["density", "pi", "--drifts", "1,1"], ["density", "cdf", "--drifts", "a,b"],
                                  ["density", "toda", "--drifts", "0.5,1", "--x", "1"]])
def test_cli_usage_errors(args, capsys):
    code, _, err = _cli(args, capsys)
    assert code == 2
    assert "error" in err


def test_cli_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**FAST, "seed": 3}))
    code, _, _ = _cli(["verify", "exp_sup", "--config", str(cfg), "--output-dir", str(tmp_path / "o"),
                       "--format", "json"], capsys)
    assert code in (0, 1)
    data = json.loads((tmp_path / "o" / "report.json").read_text())
    assert data["seed"] == 3 and data["config"]["N_samples"] == 300
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _cli(["verify", "exp_sup", "--config", str(bad)], capsys)[0] == 2


def test_cli_env_output_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    code, _, _ = _cli(["verify", "density_normalization"], capsys)
    assert code == 0
    assert (tmp_path / "env" / "report.json").exists()


def test_cli_same_seed_same_report(tmp_path, capsys):
    args = ["verify", "exp_sup", "--samples", "300", "--T", "5", "--dt", "0.02", "--format", "json"]
    _cli(args + ["--output-dir", str(tmp_path / "a")], capsys)
    _cli(args + ["--output-dir", str(tmp_path / "b")], capsys)
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_cli_plot(tmp_path, capsys):
    code, _, _ = _cli(["plot", "exp_sup", "--samples", "300", "--T", "5", "--dt", "0.02",
                       "--output-dir", str(tmp_path)], capsys)
    assert code in (0, 1)
    assert (tmp_path / "plots" / "exp_sup_terminal.svg").exists()
    assert not (tmp_path / "report.json").exists()


def test_cli_density(capsys):
    code, out, _ = _cli(["density", "cdf", "--drifts", "1", "--x", "0.5"], capsys)
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(1 - np.exp(-1.0), abs=1e-12)
    code, out, _ = _cli(["density", "toda", "--drifts", "1,1", "--x", "0.5,1.5"], capsys)
    assert code == 0 and len(json.loads(out)["value"]) == 2
    code, out, _ = _cli(["density", "pi", "--drifts", "0.7,1.6", "--x", "0.2,0.9"], capsys)
    assert code == 0 and json.loads(out)["value"] > 0


@pytest.mark.parametrize("system", ["lpp", "loggamma", "wall", "xarray"])
def test_cli_simulate(system, tmp_path, capsys):
    code, out, _ = _cli(["simulate", system, "--drifts", "0.7,1.6", "--T", "1", "--output-dir", str(tmp_path)],
                        capsys)
    assert code == 0
    path = out.strip()
    assert os.path.dirname(path) == str(tmp_path / "env_dumps")
    assert len(open(path).read().splitlines()) > 1
