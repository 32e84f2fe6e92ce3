"""End-to-end tests of the deltabench command line on a small simulated study."""

import json

import pandas as pd
import pytest

from config import DEFAULT_ROSTER, ExperimentConfig, parse_override
from main import build_parser, main
from src.errors import ConfigurationError, FitError
from src.hedgers import create_hedger
from src.pipeline import Experiment

SMALL = [
    "simulation.in_sample_days=45",
    "simulation.train_days=36",
    "simulation.n_oos_sets=2",
    "simulation.oos_days=10",
    "training.epochs=2",
    "training.hidden_layers=[4]",
    "roster=['zero', 'bs_delta', 'fixed', 'delta', 'delta_vega', 'hull_white']",
    "nets=['M_sigtau']",
]


def _args(command, run_dir, *extra):
    args = [command, "--run-dir", str(run_dir)]
    for item in SMALL:
        args += ["--set", item]
    return args + list(extra)


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("run")
    assert main(_args("simulate", run_dir, "--horizon", "1d")) == 0
    assert main(["run", "--run-dir", str(run_dir)]) == 0
    return run_dir


def test_simulate_writes_samples_and_manifest(finished_run):
    manifest = json.loads((finished_run / "manifest.json").read_text())
    assert manifest["horizons"] == ["1d"]
    assert manifest["dataset"] == "bs"
    assert [c["command"] for c in manifest["commands"]][:2] == ["simulate", "run"]
    assert manifest["config"]["simulation"]["oos_days"] == 10
    assert manifest["log_levels"]["INFO"] > 0
    rules = {r["name"]: r for r in manifest["cleaning_rules"]["1d"]}
    assert rules["Moneyness Range"]["enabled"] and not rules["Zero Volume"]["enabled"]
    for set_id in range(3):
        assert (finished_run / "paths" / f"path_{set_id:02d}.csv").exists()
    samples = pd.read_csv(finished_run / "samples" / "samples_1d.csv")
    assert sorted(samples["set_id"].unique()) == [0, 1, 2]


def test_cleaning_report_includes_prefiltered_rows(finished_run):
    samples = pd.read_csv(finished_run / "samples" / "samples_1d.csv")
    drops = pd.read_csv(finished_run / "samples" / "build_drops_1d.csv").set_index("reason")["count"]
    cleaning = pd.read_csv(finished_run / "samples" / "cleaning_1d.csv").set_index("rule")["removed"]
    prefiltered = drops["moneyness_prefilter"] + drops["otm_prefilter"]
    assert cleaning["input"] == len(samples) + prefiltered
    assert cleaning["Moneyness Range"] >= drops["moneyness_prefilter"]
    assert cleaning["In The Money"] >= drops["otm_prefilter"]
    rule_rows = cleaning.drop(["input", "retained_calls", "retained_puts"])
    assert rule_rows.sum() + cleaning["retained_calls"] + cleaning["retained_puts"] == cleaning["input"]


def test_run_writes_reports(finished_run):
    reports = finished_run / "reports"
    frame = pd.read_csv(reports / "mshe_1d.csv")
    assert set(frame["model"]) == {"zero", "bs_delta", "fixed", "delta", "delta_vega", "hull_white",
                                   "ann_M_sigtau"}
    assert set(frame["window_id"]) == {1, 2}
    assert (frame.loc[frame["model"] == "bs_delta", "rel_improvement"] == 0.0).all()
    table = pd.read_csv(reports / "table.csv", index_col="model")
    assert list(table.columns) == ["display_name", "instruments", "1d_calls", "1d_puts", "1d_both"]
    assert table.loc["delta", "display_name"] == "Delta-only"
    coefficients = pd.read_csv(reports / "coefficients_1d.csv")
    assert set(coefficients["model"]) == {"delta", "delta_vega", "hull_white"}
    assert (finished_run / "models" / "1d" / "ann_M_sigtau_w00.json").exists()
    assert (finished_run / "logs" / "events.jsonl").stat().st_size > 0


def test_report_prints_summary(finished_run, capsys):
    assert main(["report", "--run-dir", str(finished_run)]) == 0
    out = capsys.readouterr().out
    assert "horizon 1d" in out
    assert "BS Delta" in out and "ANN(M; sigma sqrt(tau))" in out
    assert (finished_run / "reports" / "summary.txt").read_text() == out
    assert (finished_run / "reports" / "mshe_series_1d.csv").exists()
    assert (finished_run / "reports" / "gap_1d.csv").exists()


def test_simulation_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for run_dir in (first, second):
        assert main(_args("simulate", run_dir, "--horizon", "1d", "--seed", "5")) == 0
    assert (first / "samples" / "samples_1d.csv").read_bytes() == (second / "samples" / "samples_1d.csv").read_bytes()


def test_input_errors_exit_with_two(tmp_path, capsys):
    assert main(["run", "--run-dir", str(tmp_path / "empty")]) == 2
    assert main(["simulate", "--run-dir", str(tmp_path / "x"), "--set", "simulation.nope=1"]) == 2
    assert main(["simulate", "--run-dir", str(tmp_path / "x"), "--horizon", "1h"]) == 2
    assert main(["simulate", "--run-dir", str(tmp_path / "x"), "--set", "horizons=['x']"]) == 2
    assert main(["simulate", "--run-dir", str(tmp_path / "x"), "--set", "horizons=[1.5]"]) == 2
    assert main(["report", "--run-dir", str(tmp_path / "empty")]) == 2
    assert "deltabench" in capsys.readouterr().err


def test_model_errors_exit_with_three(tmp_path, monkeypatch):
    def failing_run(self, horizons=None):
        raise FitError("rank-deficient design", model="delta", columns=["delta"])

    monkeypatch.setattr(Experiment, "run", failing_run)
    assert main(["run", "--run-dir", str(tmp_path)]) == 3


def test_config_overrides():
    assert parse_override("simulation.s0=2500") == {"simulation.s0": 2500}
    assert parse_override("window_mode=rolling") == {"window_mode": "rolling"}
    config = ExperimentConfig.create_default(model="heston")
    assert "delta_vega_neutral" in config.roster
    with pytest.raises(ConfigurationError):
        config.apply_overrides({"simulation.train_days": 500})
    with pytest.raises(ConfigurationError):
        config.apply_overrides({"seed": "one"})
    with pytest.raises(ConfigurationError):
        parse_override("seed")
    for key, value in (("horizons", ["x"]), ("horizons", [1.5]), ("roster", ["zero", 1]),
                       ("training.hidden_layers", [4, True])):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.create_default().apply_overrides({key: value})
    config = ExperimentConfig.create_default()
    config.apply_overrides({"horizons": [2], "training.hidden_layers": [8, 4]})
    assert config.horizons == [2] and config.training.hidden_layers == [8, 4]


def test_ingest_needs_trade_files():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["ingest"])


def test_semilinear_models_can_join_the_roster():
    config = ExperimentConfig.create_default()
    assert "semilinear_1" not in config.roster
    config.apply_overrides({"roster": DEFAULT_ROSTER + ["semilinear_1", "semilinear_2"]})
    models = [create_hedger(name) for name in config.roster]
    assert [m.name for m in models][-2:] == ["semilinear_1", "semilinear_2"]
