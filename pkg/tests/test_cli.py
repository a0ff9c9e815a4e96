import shutil
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from carelab import io
from carelab.cli import main
from carelab.estimators import fit_twfe
from carelab.harness import ConfigError, ReplicateError, load_config, run_montecarlo
from carelab.panel_sim import DgpSpec, generate_reduced_form

FIXTURES = Path(__file__).parent / "fixtures"


def write_config(tmp_path, text, name="c.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_sweep_two_by_two(tmp_path):
    cfg = write_config(tmp_path, "[experiment]\nseed = 1\n[sweep]\nwealth_points = 2\nwage_points = 2\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    df = io.read_sweep(tmp_path / "o" / "sweep.csv")
    assert len(df) == 4


def test_sweep_zero_medical_cost(tmp_path):
    cfg = write_config(tmp_path, "[experiment]\nseed = 1\n[model]\nmedical_cost = 0\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    df = io.read_sweep(tmp_path / "o" / "sweep.csv")
    assert (df["delta_work_prob"] <= 0).all()


def test_sweep_default_corners(tmp_path):
    cfg = write_config(tmp_path, "[experiment]\nseed = 1\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    df = io.read_sweep(tmp_path / "o" / "sweep.csv")
    lo_w, hi_w = df["wealth"].min(), df["wealth"].max()
    lo_y, hi_y = df["wage"].min(), df["wage"].max()
    at = lambda w, y: df.loc[(df.wealth == w) & (df.wage == y), "delta_work_prob"].item()  # noqa: E731
    assert at(lo_w, hi_y) > 0
    assert at(hi_w, lo_y) == df["delta_work_prob"].min()


def test_missing_seed_is_validation_error(tmp_path, capsys):
    cfg = write_config(tmp_path, "[experiment]\nout = o\n")
    assert main(["sweep", "--config", cfg]) == 1
    assert "experiment.seed" in capsys.readouterr().err


def test_seed_flag_supplies_seed(tmp_path):
    cfg = write_config(tmp_path, "[sweep]\nwealth_points = 2\nwage_points = 2\n")
    assert main(["sweep", "--config", cfg, "--seed", "5", "--out", str(tmp_path / "o")]) == 0


def test_unknown_key_names_section(tmp_path, capsys):
    cfg = write_config(tmp_path, "[experiment]\nseed = 1\n[dgp]\nn_units = 5\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "dgp.n_units" in capsys.readouterr().err


def test_bad_value_names_key(tmp_path, capsys):
    cfg = write_config(tmp_path, "[experiment]\nseed = 1\n[model.shocks]\nscale = wide\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "model.shocks.scale" in capsys.readouterr().err


def test_pipeline_mismatch(tmp_path):
    cfg = write_config(tmp_path, "[experiment]\npipeline = sweep\nseed = 1\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_usage_errors_exit_one(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["sweep"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--config", "x.ini", "--seed", "-3"])
    assert exc.value.code == 1


def test_missing_config_file(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "nope.ini")]) == 1


def test_simulate_then_estimate(tmp_path):
    sim = write_config(tmp_path, "[experiment]\nseed = 3\n[dgp]\nn_individuals = 300\n", "sim.ini")
    assert main(["simulate", "--config", sim, "--out", str(tmp_path / "sim")]) == 0
    panel = io.read_panel(tmp_path / "sim" / "panel.csv")
    assert len(io.read_truth(tmp_path / "sim" / "truth.csv")) > 1
    est = write_config(
        tmp_path,
        "[experiment]\nseed = 3\n[estimate]\npanel = sim/panel.csv\nstratify = pooled, female\n"
        "se_method = influence\n",
        "est.ini",
    )
    assert main(["estimate", "--config", est, "--out", str(tmp_path / "est")]) == 0
    out = sorted(p.name for p in (tmp_path / "est").iterdir())
    assert "results_twfe_pooled.csv" in out and "group_time_female.csv" in out
    res = io.read_results(tmp_path / "est" / "results_twfe_pooled.csv")
    assert res.loc[0, "estimate"] == fit_twfe(panel)["d_it"]


def test_structural_simulate_writes_model_outputs(tmp_path):
    cfg = write_config(
        tmp_path,
        "[experiment]\nseed = 4\n[dgp]\nmode = structural\nn_individuals = 100\n"
        "[health]\nn_paths = 2000\n",
    )
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    names = {p.name for p in (tmp_path / "o").iterdir()}
    assert names == {"panel.csv", "truth.csv", "value_function.csv", "health.csv"}


def test_estimate_fixture_panel(tmp_path):
    shutil.copy(FIXTURES / "did_2x2.csv", tmp_path / "p.csv")
    cfg = write_config(
        tmp_path, "[experiment]\nseed = 1\n[estimate]\npanel = p.csv\nestimators = twfe\n"
    )
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    res = io.read_results(tmp_path / "o" / "results_twfe_pooled.csv")
    assert res.loc[0, "estimate"] == pytest.approx(1.0)


def test_estimate_degenerate_outcome(tmp_path, caplog):
    panel, _ = generate_reduced_form(DgpSpec(n_individuals=100, rng_seed=1))
    io.write_panel(tmp_path / "p.csv", panel.assign(employment=1))
    cfg = write_config(
        tmp_path, "[experiment]\nseed = 1\n[estimate]\npanel = p.csv\nestimators = twfe\n"
    )
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    res = io.read_results(tmp_path / "o" / "results_twfe_pooled.csv")
    assert res.loc[0, "estimate"] == pytest.approx(0.0, abs=1e-12)
    assert res.loc[0, "se"] == pytest.approx(0.0, abs=1e-12)
    assert "degenerate" in caplog.text


def test_estimate_schema_error_is_validation(tmp_path, capsys):
    df = pd.read_csv(FIXTURES / "did_2x2.csv", dtype=str, keep_default_na=False)
    df.loc[1, "d_it"] = "maybe"
    df.to_csv(tmp_path / "p.csv", index=False)
    cfg = write_config(tmp_path, "[experiment]\nseed = 1\n[estimate]\npanel = p.csv\n")
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "row 3, column 'd_it'" in capsys.readouterr().err


def test_estimate_missing_panel(tmp_path):
    cfg = write_config(tmp_path, "[experiment]\nseed = 1\n[estimate]\npanel = none.csv\n")
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_runtime_failure_exit_two(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "[experiment]\nseed = 9\nreplications = 2\n[dgp]\nn_individuals = 50\nbase_employment = 0.99\n",
    )
    assert main(["montecarlo", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "replicate 0 (seed 9)" in err
    assert not (tmp_path / "o" / "montecarlo.csv").exists()


def test_replicate_error_carries_provenance():
    cfg = load_config(text="[dgp]\nn_individuals = 50\nbase_employment = 0.99\n", seed=4,
                      pipeline="montecarlo")
    with pytest.raises(ReplicateError) as exc:
        run_montecarlo(cfg, write=False)
    assert (exc.value.index, exc.value.seed) == (0, 4)


def test_single_replicate_equals_direct_fit():
    cfg = load_config(text="[dgp]\nn_individuals = 400\n[estimate]\nestimators = twfe\n", seed=12,
                      pipeline="montecarlo")
    report, _ = run_montecarlo(cfg, write=False)
    panel, truth = generate_reduced_form(DgpSpec(n_individuals=400, rng_seed=12))
    row = report.lookup("twfe", "d_it")
    assert row.mean_estimate == fit_twfe(panel)["d_it"]
    assert row.truth == truth.att and row.n_reps == 1


def test_montecarlo_same_config_same_bytes(tmp_path):
    text = "[experiment]\nseed = 2\nreplications = 4\n[dgp]\nn_individuals = 300\n[estimate]\nn_boot = 49\n"
    cfg = write_config(tmp_path, text)
    assert main(["montecarlo", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["montecarlo", "--config", cfg, "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "montecarlo.csv").read_bytes() == (tmp_path / "b" / "montecarlo.csv").read_bytes()


def test_null_dgp_coverage():
    cfg = load_config(
        text="[experiment]\nreplications = 400\n[dgp]\neffect_profile = 0\n"
        "[estimate]\nestimators = twfe\n",
        seed=77,
        pipeline="montecarlo",
    )
    report, _ = run_montecarlo(cfg, write=False)
    row = report.lookup("twfe", "d_it")
    assert row.truth == 0.0
    assert 0.92 <= row.coverage <= 0.98


def test_config_errors_name_path():
    with pytest.raises(ConfigError, match="estimate.panel"):
        load_config(text="[experiment]\nseed = 1\n", pipeline="estimate")
    with pytest.raises(ConfigError, match="bogus: unknown section"):
        load_config(text="[bogus]\nx = 1\n", seed=1, pipeline="sweep")
    with pytest.raises(ConfigError, match="regression.moderator"):
        load_config(text="[estimate]\nestimators = interacted\n", seed=1, pipeline="montecarlo")
    with pytest.raises(ConfigError, match="dgp"):
        load_config(text="[dgp]\nn_waves = 2\n", seed=1, pipeline="simulate")
    np.testing.assert_equal(load_config(text="", seed=2**64 - 1, pipeline="sweep").seed, 2**64 - 1)
