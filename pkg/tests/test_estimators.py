import numpy as np
import pandas as pd
import pytest

from carelab.estimators import (
    Absorber,
    RegressionSpec,
    WeakFirstStageError,
    average_within_id,
    event_dummies,
    event_term,
    fit_event_study,
    fit_interacted,
    fit_twfe,
    pretrend_test,
    wald_ratio,
    winsorize,
)
from carelab.panel_sim import DgpSpec, generate_reduced_form
from conftest import random_panel
from oracles import dense_twfe

EVENT = RegressionSpec(treatment="event")


def test_tiny_did_recovers_one(tiny_did):
    res = fit_twfe(tiny_did)
    assert res["d_it"] == pytest.approx(1.0, abs=1e-12)
    assert res.n_obs == 4 and res.n_clusters == 2


def test_constant_regressor_is_dropped(tiny_did):
    df = tiny_did.assign(const=1.0)
    res = fit_twfe(df, RegressionSpec(covariates=("const",)))
    assert res.dropped == ("const",)
    assert res.names == ("d_it",)
    with pytest.raises(KeyError, match="collinear"):
        res["const"]


@pytest.mark.parametrize("seed", range(25))
def test_twfe_matches_dense_dummy_regression(seed):
    rng = np.random.default_rng(seed)
    df = random_panel(rng, n_cov=2)
    if df["d_it"].nunique() < 2 or df["id"].nunique() < 3:
        pytest.skip("degenerate draw")
    spec = RegressionSpec(covariates=("x0", "x1"))
    try:
        res = fit_twfe(df, spec)
    except ValueError:
        pytest.skip("treatment collinear with fixed effects")
    if res.dropped:
        pytest.skip("collinear draw")
    b, V = dense_twfe(df, "employment", ["d_it", "x0", "x1"])
    np.testing.assert_allclose(res.coef, b, atol=1e-8)
    np.testing.assert_allclose(res.cov, V, atol=1e-8)


def test_invariant_to_outcome_shift():
    rng = np.random.default_rng(0)
    df = random_panel(rng, n_max=40, t_max=5)
    a = fit_twfe(df)
    b = fit_twfe(df.assign(employment=df["employment"] + 7.5))
    np.testing.assert_allclose(a.coef, b.coef, atol=1e-10)
    np.testing.assert_allclose(a.se, b.se, atol=1e-10)


def test_invariant_to_order_preserving_wave_relabel():
    rng = np.random.default_rng(1)
    df = random_panel(rng, n_max=40, t_max=5)
    relabel = df.assign(wave=(df["wave"] - 2000) * 3 + 1)
    np.testing.assert_allclose(fit_twfe(df).coef, fit_twfe(relabel).coef, atol=1e-12)


def test_absorber_reaches_tolerance():
    rng = np.random.default_rng(2)
    ids = rng.integers(0, 50, 400)
    waves = rng.integers(0, 6, 400)
    absorb = Absorber(ids, waves)
    x = absorb(rng.normal(size=(400, 1)))[:, 0]
    for g in (ids, waves):
        means = np.bincount(g, x) / np.maximum(np.bincount(g), 1)
        assert np.max(np.abs(means)) < 1e-8
    assert absorb.sweeps > 0


def test_degenerate_outcome_gives_zero():
    rng = np.random.default_rng(3)
    df = random_panel(rng, n_max=20, t_max=4).assign(employment=1.0)
    res = fit_twfe(df)
    assert res.degenerate
    assert res["d_it"] == pytest.approx(0.0, abs=1e-12)
    assert res.stderr("d_it") == pytest.approx(0.0, abs=1e-12)


def test_sample_filter_accepts_query_string():
    rng = np.random.default_rng(4)
    df = random_panel(rng, n_max=40, t_max=5).assign(gender=lambda d: d["id"] % 2)
    a = fit_twfe(df, RegressionSpec(sample="gender == 0"))
    b = fit_twfe(df, RegressionSpec(sample=lambda d: d["gender"] == 0))
    np.testing.assert_array_equal(a.coef, b.coef)
    assert a.n_obs == int((df["gender"] == 0).sum())


def test_rows_layout(tiny_did):
    rows = list(fit_twfe(tiny_did).rows())
    assert len(rows) == 1 and len(rows[0]) == 7
    assert rows[0][0] == "d_it" and rows[0][5:] == (4, 2)


# -- event study ----------------------------------------------------------------


def test_event_term_names():
    assert [event_term(q) for q in (-4, 0, 2)] == ["event[-4]", "event[0]", "event[+2]"]


def test_event_dummies_bin_ends_and_reference():
    q = pd.Series(pd.array([-12, -2, 0, 10, pd.NA], dtype="Int64"))
    d = event_dummies(q, (-8, -6, -4, 0, 2, 4, 6, 8), -2)
    assert d[-8].tolist() == [1, 0, 0, 0, 0]
    assert d[8].tolist() == [0, 0, 0, 1, 0]
    assert d[0].tolist() == [0, 0, 1, 0, 0]
    assert sum(col[1] for col in d.values()) == 0  # reference row is in no bin


def test_event_dummies_rejects_stray_times():
    with pytest.raises(ValueError, match="between bins"):
        event_dummies(pd.Series([1, 3]), (-4, 0, 2, 4), -2)


def test_event_spec_rejects_reference_in_bins():
    with pytest.raises(ValueError):
        RegressionSpec(treatment="event", event_bins=(-4, -2, 0), reference=-2)


def test_event_study_recovers_profile():
    panel, truth = generate_reduced_form(
        DgpSpec(n_individuals=6000, effect_profile=(-0.02, -0.04, -0.06, -0.08), rng_seed=11)
    )
    res = fit_event_study(panel, EVENT)
    # Five waves: event times run from -8 to +6, so +8 is empty.
    assert "event[+8]" in res.absent
    assert "event[-2]" not in res.names
    for q, want in ((0, -0.02), (2, -0.04), (4, -0.06)):
        assert res[event_term(q)] == pytest.approx(want, abs=4 * res.stderr(event_term(q)))
    with pytest.raises(KeyError, match="absent"):
        res["event[+8]"]


def test_pretrend_test_null_and_trend():
    flat, _ = generate_reduced_form(DgpSpec(n_individuals=4000, n_waves=7, rng_seed=12))
    sloped, _ = generate_reduced_form(
        DgpSpec(n_individuals=4000, n_waves=7, pretrend_slope=0.02, rng_seed=12)
    )
    a = pretrend_test(fit_event_study(flat, EVENT))
    b = pretrend_test(fit_event_study(sloped, EVENT))
    assert all(int(t[6:-1]) < 0 for t in a.terms)
    assert a.df == len(a.terms) and 0 <= a.pvalue <= 1
    assert b.wald > a.wald
    assert b.reject(0.05)


def test_pretrend_needs_pre_terms(tiny_did):
    with pytest.raises(ValueError, match="pre-event"):
        pretrend_test(fit_twfe(tiny_did))


# -- interactions ---------------------------------------------------------------


def test_time_varying_moderator_rejected():
    panel, _ = generate_reduced_form(DgpSpec(n_individuals=200, rng_seed=13))
    spec = RegressionSpec(treatment="interacted", moderator="log_assets")
    with pytest.raises(ValueError, match="varies within id"):
        fit_interacted(panel, spec)


def test_zero_moderator_interaction_dropped():
    panel, _ = generate_reduced_form(DgpSpec(n_individuals=200, rng_seed=13))
    spec = RegressionSpec(treatment="interacted", moderator="zero", moderator_transform="none")
    res = fit_interacted(panel.assign(zero=0.0), spec)
    assert res.dropped == ("d_it:zero",)


def test_interacted_recovers_split_effect():
    main, inter = [], []
    spec = RegressionSpec(
        treatment="interacted", moderator="avg_assets", moderator_transform="above_median"
    )
    for r in range(200):
        panel, _ = generate_reduced_form(
            DgpSpec(n_individuals=1000, effect_profile=(-0.08,), moderator_shift=0.05,
                    male_effect_scale=1.0, rng_seed=1000 + r)
        )
        panel["avg_assets"] = average_within_id(panel, "log_assets")
        res = fit_interacted(panel, spec)
        main.append(res["d_it"])
        inter.append(res["d_it:avg_assets"])
    assert np.mean(main) == pytest.approx(-0.08, abs=0.01)
    assert np.mean(inter) == pytest.approx(0.05, abs=0.01)


# -- utilities ------------------------------------------------------------------


def test_wald_ratio_delta_method():
    out = wald_ratio(-0.05, 0.1, var_rf=0.01**2, var_fs=0.02**2)
    assert out.estimate == pytest.approx(-0.5)
    want = np.sqrt((0.01 / 0.1) ** 2 + (0.05 * 0.02 / 0.01) ** 2)
    assert out.se == pytest.approx(want)


def test_wald_ratio_weak_first_stage():
    with pytest.raises(WeakFirstStageError):
        wald_ratio(0.1, 0.0)


def test_winsorize_caps_at_percentile():
    s = pd.Series(np.arange(1.0, 101.0))
    out = winsorize(s, 99)
    assert isinstance(out, pd.Series)
    assert out.max() == 99 and out.min() == 1


def test_winsorize_keeps_missing():
    x = np.array([1.0, np.nan, 1000.0, 2.0, 3.0])
    out = winsorize(x, 75)
    assert np.isnan(out[1]) and out[2] < 1000


def test_winsorize_errors():
    with pytest.raises(ValueError):
        winsorize(np.array([np.nan, np.nan]))
    with pytest.raises(ValueError):
        winsorize(np.arange(5.0), 40)
