"""Synthetic staggered-event panels with known treatment effects.

Two generators share one output schema:

* ``generate_reduced_form`` draws a linear-probability employment model with
  unit and wave effects, bounded covariates and an event-time effect profile.
  Pre-trend violations can be injected for negative tests.
* ``generate_structural`` simulates households forward under a solved
  dynamic model.  The untreated counterfactual reuses every random draw but
  holds parental health at ``z = 0``.

Waves are labelled by survey year (``first_year + wave_spacing * k``), so
``event_time = wave - event_wave`` is measured in years.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import pandas as pd

from .dynamic_program import DynamicParams, ValueFunction, solve_bellman
from .model_core import ALTERNATIVES

PANEL_COLUMNS = (
    "id",
    "wave",
    "gender",
    "event_wave",
    "treated_ever",
    "d_it",
    "event_time",
    "employment",
    "weekly_hours",
    "age",
    "married",
    "school_years",
    "self_rated_health",
    "log_assets",
    "child_under6",
    "urban",
    "father_age",
    "mother_age",
    "true_y0",
)

# Employment effects of the time-varying controls in the reduced-form model.
DEFAULT_BETA = {"child_under6": -0.03, "self_rated_health": -0.005, "log_assets": -0.004}


@dataclass(frozen=True)
class DgpSpec:
    """Design of a synthetic panel.

    ``effect_profile[q]`` is the employment effect ``q`` waves after the event;
    the last entry carries forward.  ``event_wave_probs`` weights the event
    wave over wave indices ``1..n_waves-1`` (uniform by default).
    ``pretrend_slope`` adds ``slope * (k - k_event)`` to the pre-event rows of
    eventually-treated units, a differential trend that breaks parallel
    trends.  ``moderator_shift`` is added to the effect of units whose
    average log assets exceed the median.
    """

    n_individuals: int = 2000
    n_waves: int = 5
    mode: str = "reduced_form"
    never_treated_share: float = 0.3
    event_wave_probs: Sequence[float] | None = None
    effect_profile: Sequence[float] = (-0.04,)
    male_effect_scale: float = 1.0
    moderator_shift: float = 0.0
    pretrend_slope: float = 0.0
    covariates: Sequence[str] = tuple(DEFAULT_BETA)
    base_employment: float = 0.80
    unit_spread: float = 0.08
    time_spread: float = 0.03
    treated_level_shift: float = -0.02
    hours_effect: float = 0.0
    male_share: float = 0.53
    attrition_rate: float = 0.0
    first_year: int = 2012
    wave_spacing: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("reduced_form", "structural"):
            raise ValueError(f"unknown generator mode {self.mode!r}")
        if self.n_waves < 3:
            raise ValueError("n_waves must be at least 3")
        if self.n_individuals < 1:
            raise ValueError("n_individuals must be positive")
        for name in ("never_treated_share", "male_share"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.attrition_rate < 1:
            raise ValueError("attrition_rate must lie in [0, 1)")
        if len(self.effect_profile) == 0:
            raise ValueError("effect_profile needs at least one entry")
        unknown = set(self.covariates) - set(DEFAULT_BETA)
        if unknown:
            raise ValueError(f"covariates without a data-generating law: {sorted(unknown)}")
        if self.event_wave_probs is not None:
            p = np.asarray(self.event_wave_probs, dtype=float)
            if p.shape != (self.n_waves - 1,) or np.any(p < 0) or not np.isclose(p.sum(), 1):
                raise ValueError("event_wave_probs must be n_waves-1 probabilities")

    @property
    def waves(self) -> np.ndarray:
        return self.first_year + self.wave_spacing * np.arange(self.n_waves)

    def effect(self, q):
        prof = np.asarray(self.effect_profile, dtype=float)
        return prof[np.minimum(q, prof.size - 1)]


@dataclass(frozen=True)
class GroundTruth:
    """True effects on the treated.

    ``effects`` holds one row per treated post-event observation with columns
    ``id, wave, event_time, effect``.  ``att`` is the observation-weighted
    mean, identical to the count-weighted mean of ``att_by_event_time``.
    """

    att: float
    att_by_event_time: dict[int, float]
    effects: pd.DataFrame
    beta: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_effects(cls, effects: pd.DataFrame, beta=None) -> "GroundTruth":
        effects = effects.sort_values(["id", "wave"]).reset_index(drop=True)
        if effects.empty:
            return cls(float("nan"), {}, effects, dict(beta or {}))
        grouped = effects.groupby("event_time")["effect"]
        by_q = {int(q): float(v) for q, v in grouped.mean().items()}
        counts = grouped.size()
        att = float(sum(by_q[q] * counts[q] for q in by_q) / counts.sum())
        return cls(att, by_q, effects, dict(beta or {}))

    def restrict(self, panel: pd.DataFrame) -> "GroundTruth":
        """Ground truth over the observations still present in ``panel``."""
        keys = panel[["id", "wave"]]
        kept = self.effects.merge(keys, on=["id", "wave"], how="inner")
        return GroundTruth.from_effects(kept, self.beta)

    def rows(self):
        yield "overall", None, self.att
        for q in sorted(self.att_by_event_time):
            yield "event_time", q, self.att_by_event_time[q]


def _event_indices(spec: DgpSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Event wave index per unit; -1 marks never treated."""
    treated = rng.random(n) >= spec.never_treated_share
    probs = spec.event_wave_probs
    if probs is None:
        probs = np.full(spec.n_waves - 1, 1.0 / (spec.n_waves - 1))
    k = 1 + rng.choice(spec.n_waves - 1, size=n, p=np.asarray(probs, dtype=float))
    return np.where(treated, k, -1)


def _covariates(spec: DgpSpec, rng: np.random.Generator, n: int) -> dict[str, np.ndarray]:
    """Bounded covariate draws, arrays of shape ``(n, n_waves)``."""
    W = spec.n_waves
    k = np.arange(W)[None, :]
    age0 = rng.integers(22, 50, size=n)[:, None]
    age = age0 + spec.wave_spacing * k
    married = np.broadcast_to((rng.random(n) < 0.85)[:, None], (n, W)).astype(int)
    school = np.broadcast_to(rng.integers(0, 20, size=n)[:, None], (n, W))
    health = rng.integers(1, 6, size=(n, W))
    level = np.clip(rng.normal(12.6, 1.0, size=n), 9.0, 16.0)[:, None]
    log_assets = np.clip(level + rng.normal(0.0, 0.3, size=(n, W)), 8.0, 17.0)
    child = (rng.random((n, W)) < np.where(age < 35, 0.5, 0.1)).astype(int)
    urban = np.broadcast_to((rng.random(n) < 0.49)[:, None], (n, W)).astype(int)
    gap_f = rng.integers(24, 34, size=n)[:, None]
    gap_m = rng.integers(22, 32, size=n)[:, None]
    return {
        "age": age,
        "married": married,
        "school_years": school,
        "self_rated_health": health,
        "log_assets": log_assets,
        "child_under6": child,
        "urban": urban,
        "father_age": age + gap_f,
        "mother_age": age + gap_m,
    }


def _assemble(spec, ids, gender, k_event, covs, employment, hours, y0) -> pd.DataFrame:
    n, W = employment.shape
    waves = spec.waves
    wave = np.broadcast_to(waves[None, :], (n, W))
    treated = k_event >= 0
    event_wave = np.where(treated, spec.first_year + spec.wave_spacing * k_event, -1)
    ev = np.broadcast_to(event_wave[:, None], (n, W))
    d_it = (treated[:, None] & (wave >= ev)).astype(int)
    df = pd.DataFrame(
        {
            "id": np.repeat(ids, W),
            "wave": wave.ravel(),
            "gender": np.repeat(gender, W),
            "event_wave": pd.array(np.where(treated[:, None], ev, 0).ravel(), dtype="Int64"),
            "treated_ever": np.repeat(treated.astype(int), W),
            "d_it": d_it.ravel(),
            "event_time": pd.array((wave - ev).ravel(), dtype="Int64"),
            "employment": employment.ravel().astype(int),
            "weekly_hours": np.where(employment.ravel() == 1, hours.ravel(), np.nan),
            **{k: np.asarray(v).ravel() for k, v in covs.items()},
            "true_y0": y0.ravel().astype(int),
        }
    )
    never = df["treated_ever"].to_numpy() == 0
    df.loc[never, "event_wave"] = pd.NA
    df.loc[never, "event_time"] = pd.NA
    return df[list(PANEL_COLUMNS)]


def generate_reduced_form(spec: DgpSpec) -> tuple[pd.DataFrame, GroundTruth]:
    """Linear-probability panel with a known event-time effect profile.

    Employment is ``1{U < p0 + effect}`` and ``true_y0`` is ``1{U < p0}`` with
    the same uniform draw.  Raises if any latent probability leaves [0, 1];
    the bounded design keeps that from happening at the defaults.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.rng_seed))
    n, W = spec.n_individuals, spec.n_waves
    ids = np.arange(1, n + 1)
    gender = (rng.random(n) < spec.male_share).astype(int)
    k_event = _event_indices(spec, rng, n)
    covs = _covariates(spec, rng, n)

    alpha = rng.uniform(-spec.unit_spread, spec.unit_spread, size=n)
    alpha = alpha + spec.treated_level_shift * (k_event >= 0)
    time_fe = rng.uniform(-spec.time_spread, spec.time_spread, size=W)
    beta = {c: DEFAULT_BETA[c] for c in spec.covariates}
    centers = {"child_under6": 0.0, "self_rated_health": 1.0, "log_assets": 12.6}
    zb = sum(beta[c] * (covs[c] - centers[c]) for c in beta) if beta else 0.0

    k = np.arange(W)[None, :]
    treated = (k_event >= 0)[:, None]
    rel = k - k_event[:, None]
    pre = treated & (rel < 0)
    post = treated & (rel >= 0)
    p0 = spec.base_employment + alpha[:, None] + time_fe[None, :] + zb
    p0 = p0 + spec.pretrend_slope * np.where(pre, rel, 0)

    effect = np.where(post, spec.effect(np.maximum(rel, 0)), 0.0)
    effect = effect * np.where(gender[:, None] == 1, spec.male_effect_scale, 1.0)
    if spec.moderator_shift:
        m = covs["log_assets"].mean(axis=1)
        above = m > np.median(m)
        effect = effect + np.where(post & above[:, None], spec.moderator_shift, 0.0)
    p1 = p0 + effect
    if np.any((p0 < 0) | (p0 > 1) | (p1 < 0) | (p1 > 1)):
        raise ValueError("latent employment probability left [0, 1]; shrink the DGP spreads")

    u = rng.random((n, W))
    employment = (u < p1).astype(int)
    y0 = (u < p0).astype(int)
    hours = np.clip(
        48.0 + rng.normal(0, 6, size=n)[:, None] + rng.normal(0, 8, size=(n, W))
        + spec.hours_effect * post,
        1.0,
        100.0,
    ).round(1)

    panel = _assemble(spec, ids, gender, k_event, covs, employment, hours, y0)
    tmask = post.ravel()
    effects = pd.DataFrame(
        {
            "id": np.repeat(ids, W)[tmask],
            "wave": panel["wave"].to_numpy()[tmask],
            "event_time": panel["event_time"].to_numpy(dtype=float)[tmask].astype(int),
            "effect": effect.ravel()[tmask],
        }
    )
    truth = GroundTruth.from_effects(effects, beta)
    if spec.attrition_rate > 0:
        panel = apply_attrition(panel, spec.attrition_rate, spec.rng_seed)
        truth = truth.restrict(panel)
    return panel, truth


def _simulate_households(vf: ValueFunction, eps_i, eps_j, u_health, state0, force_healthy: bool):
    """Forward simulation; returns per-period ``(w_i, w_j, z, a_idx)`` arrays."""
    params = vf.params
    n, W = eps_i.shape
    z = np.zeros(n, dtype=int)
    a, xi, xj = (s.copy() for s in state0)
    out = {k: np.empty((n, W), dtype=int) for k in ("w_i", "w_j", "z", "a")}
    wi_alt = np.array([x[0] for x in ALTERNATIVES])
    wj_alt = np.array([x[1] for x in ALTERNATIVES])
    for t in range(W):
        v = vf.alt_values[t, z, a, xi, xj]  # (n, 4)
        pay = v - eps_i[:, t, None] * wi_alt - eps_j[:, t, None] * wj_alt
        alt = np.argmax(pay, axis=1)
        w_i, w_j = wi_alt[alt], wj_alt[alt]
        out["w_i"][:, t], out["w_j"][:, t], out["z"][:, t], out["a"][:, t] = w_i, w_j, z, a
        nxt, _ = params.next_experience(t)
        d = 1 - w_i * w_j
        p1 = params.health.at(t)[z, d]
        a = vf.savings[t, z, a, xi, xj, alt]
        xi, xj = nxt[xi, w_i], nxt[xj, w_j]
        z = np.zeros(n, dtype=int) if force_healthy else (u_health[:, t] < p1).astype(int)
    return out


def generate_structural(
    spec: DgpSpec, dyn: DynamicParams, vf: ValueFunction | None = None
) -> tuple[pd.DataFrame, GroundTruth]:
    """Panel simulated from the dynamic model.

    Each unit is one spouse of a simulated household (the husband when
    ``gender == 1``).  The event is the first wave with poor parental health.
    Per-observation effects are factual minus counterfactual employment on
    treated post-event rows.
    """
    if vf is None:
        vf = solve_bellman(dyn)
    if spec.n_waves > dyn.horizon:
        raise ValueError("n_waves cannot exceed the model horizon")
    n, W = spec.n_individuals, spec.n_waves
    ids = np.arange(1, n + 1)
    root = np.random.SeedSequence(spec.rng_seed)
    nA, nX = dyn.assets.size, dyn.experience.size

    gender = np.empty(n, dtype=int)
    eps_i = np.empty((n, W))
    eps_j = np.empty((n, W))
    u_health = np.empty((n, W))
    u_emp = np.empty((n, W))
    a0, xi0, xj0 = (np.empty(n, dtype=int) for _ in range(3))
    for r, child in enumerate(root.spawn(n)):
        g = np.random.default_rng(child)
        gender[r] = g.random() < spec.male_share
        eps_i[r], eps_j[r] = dyn.static.shocks.sample(g, W)
        u_health[r] = g.random(W)
        u_emp[r] = g.random(W)
        a0[r] = g.integers(0, max(1, nA // 2))
        xi0[r] = g.integers(nX // 4, nX // 2 + 1)
        xj0[r] = g.integers(nX // 8, nX // 3 + 1)
    state0 = (a0, xi0, xj0)
    fact = _simulate_households(vf, eps_i, eps_j, u_health, state0, force_healthy=False)
    cf = _simulate_households(vf, eps_i, eps_j, u_health, state0, force_healthy=True)

    male = gender[:, None] == 1
    employment = np.where(male, fact["w_i"], fact["w_j"])
    y0 = np.where(male, cf["w_i"], cf["w_j"])
    sick = fact["z"] == 1
    k_event = np.where(sick.any(axis=1), np.argmax(sick, axis=1), -1)

    cov_rng = np.random.default_rng(root.spawn(n + 1)[-1])
    covs = _covariates(spec, cov_rng, n)
    covs["log_assets"] = 11.5 + np.log1p(dyn.assets[fact["a"]])
    hours = np.clip(48.0 + 8.0 * (u_emp - 0.5) * 2, 1.0, 100.0).round(1)

    panel = _assemble(spec, ids, gender, k_event, covs, employment, hours, y0)
    k = np.arange(W)[None, :]
    post = ((k_event >= 0)[:, None] & (k >= k_event[:, None])).ravel()
    effects = pd.DataFrame(
        {
            "id": panel["id"].to_numpy()[post],
            "wave": panel["wave"].to_numpy()[post],
            "event_time": panel["event_time"].to_numpy(dtype=float)[post].astype(int),
            "effect": (employment - y0).ravel()[post].astype(float),
        }
    )
    truth = GroundTruth.from_effects(effects)
    if spec.attrition_rate > 0:
        panel = apply_attrition(panel, spec.attrition_rate, spec.rng_seed)
        truth = truth.restrict(panel)
    return panel, truth


def apply_attrition(panel: pd.DataFrame, rate: float, rng_seed: int) -> pd.DataFrame:
    """Drop rows at random, keeping at least two waves per unit.

    Each row survives with probability ``1 - rate``; units left with fewer than
    two rows keep their two rows with the largest survival draws.
    """
    if not 0 <= rate < 1:
        raise ValueError("attrition rate must lie in [0, 1)")
    if rate == 0:
        return panel.copy()
    rng = np.random.default_rng(np.random.SeedSequence([rng_seed, 0xA77]))
    draw = rng.random(len(panel))
    keep = draw >= rate
    rank = (
        pd.Series(-draw, index=panel.index)
        .groupby(panel["id"].to_numpy())
        .rank(method="first")
        .to_numpy()
    )
    keep |= rank <= 2
    return panel.loc[keep].reset_index(drop=True)


def validate_panel(panel: pd.DataFrame) -> None:
    """Check the schema invariants; raises ``ValueError`` naming the violation."""
    missing = [c for c in PANEL_COLUMNS if c not in panel.columns and c != "true_y0"]
    if missing:
        raise ValueError(f"panel is missing columns {missing}")
    df = panel.sort_values(["id", "wave"])
    if df.duplicated(["id", "wave"]).any():
        raise ValueError("duplicate (id, wave) rows")
    d = df["d_it"].to_numpy()
    same = df["id"].to_numpy()[1:] == df["id"].to_numpy()[:-1]
    if np.any(same & (np.diff(d) < 0)):
        raise ValueError("treatment reverts within an id; d_it must be absorbing")
    emp = df["employment"].to_numpy()
    hours_missing = df["weekly_hours"].isna().to_numpy()
    if np.any(hours_missing != (emp == 0)):
        raise ValueError("weekly_hours must be missing exactly when employment == 0")
    if not set(np.unique(emp)) <= {0, 1}:
        raise ValueError("employment must be binary")


__all__ = [
    "DEFAULT_BETA",
    "PANEL_COLUMNS",
    "DgpSpec",
    "GroundTruth",
    "apply_attrition",
    "generate_reduced_form",
    "generate_structural",
    "validate_panel",
]
