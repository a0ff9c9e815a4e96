"""Configured pipelines: sweep, simulate, estimate and Monte Carlo.

A config is an INI file.  ``[experiment]`` names the pipeline and the seed;
the other sections override defaults of the objects they build:

* ``[model]``, ``[model.care_utility]``, ``[model.shocks]``: household
  primitives for ``sweep`` (defaults: the income-effect calibration).
* ``[sweep]``: ``wealth_points``, ``wage_points``, ``wealth_range``, ``wage_range``.
* ``[dgp]``: fields of ``DgpSpec``.
* ``[dynamic]``: overrides of the structural calibration.
* ``[health]``: ``n_paths``, ``periods``, ``care_policy`` for ``simulate``.
* ``[estimate]``: ``panel``, ``estimators``, ``stratify``, ``control``,
  ``se_method``, ``n_boot``.
* ``[regression]``: ``outcome``, ``covariates``, ``cluster_col``,
  ``event_bins``, ``moderator``, ``moderator_transform``.

Sequences are comma separated.  Relative paths resolve against the config
file's directory.
"""

from __future__ import annotations

import configparser
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd

from . import io
from .dynamic_program import DynamicParams, default_dynamic_params, simulate_health_path, solve_bellman
from .estimators import (
    RegressionSpec,
    average_within_id,
    event_term,
    fit_event_study,
    fit_group_time,
    fit_interacted,
    fit_twfe,
)
from .model_core import (
    HouseholdParams,
    SweepRanges,
    gradient_sweep,
    income_effect_params,
)
from .panel_sim import DgpSpec, GroundTruth, generate_reduced_form, generate_structural

log = logging.getLogger("carelab")

PIPELINES = ("sweep", "simulate", "estimate", "montecarlo")
ESTIMATORS = ("twfe", "event_study", "group_time", "interacted")
STRATA = {"pooled": None, "female": 0, "male": 1}

MC_COLUMNS = (
    "stratum",
    "estimator",
    "term",
    "truth",
    "mean_estimate",
    "mc_sd",
    "mean_se",
    "coverage",
    "bias",
    "n_reps",
)

_KNOWN_SECTIONS = {
    "experiment": {"pipeline", "seed", "replications", "jobs", "out"},
    "model": {f.name for f in dataclasses.fields(HouseholdParams)} - {"care_utility", "shocks"},
    "model.care_utility": {"u00", "u01", "u10", "u11"},
    "model.shocks": {"kind", "scale", "corr", "quadrature_order", "quadrature_tol"},
    "sweep": {"wealth_points", "wage_points", "wealth_range", "wage_range"},
    "dgp": {f.name for f in dataclasses.fields(DgpSpec)} - {"rng_seed"},
    "dynamic": {"horizon", "rho", "r", "delta", "lambda_dep", "bequest", "shock_scale",
                "medical_cost"},
    "health": {"n_paths", "periods", "care_policy"},
    "estimate": {"panel", "estimators", "stratify", "control", "se_method", "n_boot"},
    "regression": {"outcome", "covariates", "cluster_col", "event_bins", "reference",
                   "moderator", "moderator_transform"},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names ``section.key``."""


class ReplicateError(RuntimeError):
    def __init__(self, index: int, seed: int, cause: BaseException):
        super().__init__(f"replicate {index} (seed {seed}) failed: {cause!r}")
        self.index = index
        self.seed = seed


# --------------------------------------------------------------------------
# config


def _parse_value(text: str, like: Any, where: str):
    text = text.strip()
    try:
        if isinstance(like, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
        if isinstance(like, tuple):
            items = [s.strip() for s in text.split(",") if s.strip()]
            if like and isinstance(like[0], (int, float)) and not isinstance(like[0], bool):
                kind = type(like[0])
                return tuple(kind(s) if kind is int else float(s) for s in items)
            return tuple(_auto(s) for s in items)
        return _auto(text) if like is None else text
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r}") from None


def _auto(text: str):
    if text.lower() in ("", "none"):
        return None
    if "," in text:
        return tuple(_auto(s.strip()) for s in text.split(",") if s.strip())
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


@dataclass(frozen=True)
class SweepSettings:
    wealth_points: int = 11
    wage_points: int = 11
    wealth_range: tuple[float, float] = SweepRanges().wealth
    wage_range: tuple[float, float] = SweepRanges().wage


@dataclass(frozen=True)
class HealthSettings:
    n_paths: int = 100_000
    periods: int = 20
    care_policy: float = 0.5


@dataclass(frozen=True)
class EstimateSettings:
    panel: str | None = None
    estimators: tuple[str, ...] = ("twfe", "event_study", "group_time")
    stratify: tuple[str, ...] = ("pooled",)
    control: str = "never_treated"
    se_method: str = "bootstrap"
    n_boot: int = 499


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: str
    seed: int
    replications: int = 1
    jobs: int = 1
    out: str | None = None
    household: HouseholdParams = field(default_factory=income_effect_params)
    sweep: SweepSettings = SweepSettings()
    dgp: DgpSpec = DgpSpec()
    dynamic: dict = field(default_factory=dict)
    health: HealthSettings = HealthSettings()
    estimate: EstimateSettings = EstimateSettings()
    regression: RegressionSpec = RegressionSpec()
    base_dir: str = "."

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def dynamic_params(self) -> DynamicParams:
        over = dict(self.dynamic)
        base = default_dynamic_params()
        static = base.static
        if "shock_scale" in over:
            static = replace(static, shocks=replace(static.shocks, scale=over.pop("shock_scale")))
        if "medical_cost" in over:
            static = replace(static, medical_cost=over.pop("medical_cost"))
        return default_dynamic_params(static=static, **over)


def _section(cp, name, defaults: dict) -> dict:
    if not cp.has_section(name):
        return {}
    out = {}
    for key, text in cp.items(name):
        if key not in _KNOWN_SECTIONS[name]:
            raise ConfigError(f"{name}.{key}: unknown key")
        out[key] = _parse_value(text, defaults.get(key), f"{name}.{key}")
    return out


def _defaults(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}


def _build(where: str, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path=None, text: str | None = None, seed: int | None = None,
                jobs: int | None = None, out: str | None = None,
                pipeline: str | None = None) -> ExperimentConfig:
    """Parse a config file (or ``text``); keyword overrides take precedence.

    ``pipeline`` may be omitted from ``[experiment]`` when given here.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    base_dir = "."
    if text is None:
        if path is None:
            raise ConfigError("no config given")
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        base_dir = str(p.parent)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    for name in cp.sections():
        if name not in _KNOWN_SECTIONS:
            raise ConfigError(f"{name}: unknown section")

    exp = _section(cp, "experiment", {"pipeline": "", "seed": 0, "replications": 1, "jobs": 1,
                                      "out": ""})
    if pipeline is not None and exp.get("pipeline", pipeline) != pipeline:
        raise ConfigError(
            f"experiment.pipeline: config is for {exp['pipeline']!r}, not {pipeline!r}"
        )
    pipeline = pipeline or exp.get("pipeline")
    if pipeline not in PIPELINES:
        raise ConfigError(f"experiment.pipeline: expected one of {PIPELINES}, got {pipeline!r}")
    if seed is None:
        if "seed" not in exp:
            raise ConfigError("experiment.seed: a seed is required")
        seed = exp["seed"]
    if not 0 <= seed < 2**64:
        raise ConfigError("experiment.seed: must be an unsigned 64-bit integer")
    replications = exp.get("replications", 1)
    if replications < 1:
        raise ConfigError("experiment.replications: must be at least 1")
    jobs = jobs if jobs is not None else exp.get("jobs", 1)
    if jobs < 1:
        raise ConfigError("experiment.jobs: must be at least 1")

    base_h = income_effect_params()
    h = _section(cp, "model", _defaults(base_h))
    cu = _section(cp, "model.care_utility", _defaults(base_h.care_utility))
    sh = _section(cp, "model.shocks", _defaults(base_h.shocks))
    care = _build("model.care_utility", replace, base_h.care_utility, **cu)
    shocks = _build("model.shocks", replace, base_h.shocks, **sh)
    household = _build("model", replace, base_h, care_utility=care, shocks=shocks, **h)

    sw = _build("sweep", SweepSettings, **_section(cp, "sweep", _defaults(SweepSettings())))
    if sw.wealth_points < 1 or sw.wage_points < 1:
        raise ConfigError("sweep: grid sizes must be positive")

    dgp_kw = _section(cp, "dgp", _defaults(DgpSpec()))
    dgp = _build("dgp", DgpSpec, rng_seed=seed, **dgp_kw)

    dyn = _section(cp, "dynamic", {"horizon": 10, "rho": 0.9, "r": 0.04, "delta": 2.0,
                                   "lambda_dep": 1.0, "bequest": 0.0, "shock_scale": 0.3,
                                   "medical_cost": 0.15})
    health = _build("health", HealthSettings, **_section(cp, "health", _defaults(HealthSettings())))

    est = _section(cp, "estimate", _defaults(EstimateSettings()))
    estimate = _build("estimate", EstimateSettings, **est)
    bad = [e for e in estimate.estimators if e not in ESTIMATORS]
    if bad:
        raise ConfigError(f"estimate.estimators: unknown {bad}; choose from {ESTIMATORS}")
    bad = [s for s in estimate.stratify if s not in STRATA]
    if bad:
        raise ConfigError(f"estimate.stratify: unknown {bad}; choose from {tuple(STRATA)}")
    if estimate.control not in ("never_treated", "not_yet_treated"):
        raise ConfigError(f"estimate.control: unknown {estimate.control!r}")
    if estimate.se_method not in ("bootstrap", "influence"):
        raise ConfigError(f"estimate.se_method: unknown {estimate.se_method!r}")
    if pipeline == "estimate" and not estimate.panel:
        raise ConfigError("estimate.panel: the estimate pipeline needs an input panel path")

    reg_kw = _section(cp, "regression", _defaults(RegressionSpec()))
    regression = _build("regression", RegressionSpec, **reg_kw)
    if "interacted" in estimate.estimators and not regression.moderator:
        raise ConfigError("regression.moderator: the interacted estimator needs a moderator")

    cfg = ExperimentConfig(
        pipeline=pipeline,
        seed=int(seed),
        replications=replications,
        jobs=jobs,
        out=str(Path(out).resolve()) if out is not None else (exp.get("out") or None),
        household=household,
        sweep=sw,
        dgp=dgp,
        dynamic=dyn,
        health=health,
        estimate=estimate,
        regression=regression,
        base_dir=base_dir,
    )
    if pipeline in ("simulate", "montecarlo") and dgp.mode == "structural":
        try:
            dp = cfg.dynamic_params()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"dynamic: {exc}") from None
        if dgp.n_waves > dp.horizon:
            raise ConfigError("dgp.n_waves: cannot exceed dynamic.horizon")
    return cfg


def _out_dir(cfg: ExperimentConfig, out) -> Path:
    target = out if out is not None else cfg.out
    if target is None:
        raise ConfigError("experiment.out: no output directory given")
    d = cfg.resolve(target) if out is None else Path(target)
    d.mkdir(parents=True, exist_ok=True)
    return d


# --------------------------------------------------------------------------
# pipelines


def run_sweep(cfg: ExperimentConfig, out=None) -> Path:
    """Work-probability response grid; writes ``sweep.csv``."""
    s = cfg.sweep
    result = gradient_sweep(
        cfg.household,
        wealth_grid=np.linspace(0.0, 1.0, s.wealth_points) if s.wealth_points > 1 else [0.0],
        wage_grid=np.linspace(0.0, 1.0, s.wage_points) if s.wage_points > 1 else [0.0],
        ranges=SweepRanges(wealth=tuple(s.wealth_range), wage=tuple(s.wage_range)),
    )
    return io.write_sweep(_out_dir(cfg, out) / "sweep.csv", result)


def _generate(dgp: DgpSpec, cfg: ExperimentConfig, vf=None):
    if dgp.mode == "structural":
        return generate_structural(dgp, cfg.dynamic_params(), vf)
    return generate_reduced_form(dgp)


def run_simulate(cfg: ExperimentConfig, out=None) -> dict[str, Path]:
    """Panel plus ground truth; structural runs also write the value function
    and parental health statistics."""
    d = _out_dir(cfg, out)
    written = {}
    vf = None
    if cfg.dgp.mode == "structural":
        dp = cfg.dynamic_params()
        vf = solve_bellman(dp)
        written["value_function"] = io.write_value_function(d / "value_function.csv", vf)
        h = cfg.health
        stats = simulate_health_path(dp.health, h.care_policy, T=h.periods, rng_seed=cfg.seed,
                                     n_paths=h.n_paths)
        written["health"] = io.write_health(d / "health.csv", stats)
    panel, truth = _generate(cfg.dgp, cfg, vf)
    written["panel"] = io.write_panel(d / "panel.csv", panel)
    written["truth"] = io.write_truth(d / "truth.csv", truth)
    return written


def _strata(panel: pd.DataFrame, names: Sequence[str]):
    for name in names:
        g = STRATA[name]
        yield name, panel if g is None else panel.loc[panel["gender"] == g]


def _fit_all(panel: pd.DataFrame, cfg: ExperimentConfig, seed: int) -> dict:
    """Fits of every configured estimator, keyed by estimator name."""
    est = cfg.estimate
    base = cfg.regression
    fits = {}
    for name in est.estimators:
        if name == "twfe":
            fits[name] = fit_twfe(panel, replace(base, treatment="static"))
        elif name == "event_study":
            fits[name] = fit_event_study(panel, replace(base, treatment="event"))
        elif name == "interacted":
            m = base.moderator
            data = panel.assign(**{m: average_within_id(panel, m, base.id_col)})
            fits[name] = fit_interacted(data, replace(base, treatment="interacted"))
        elif name == "group_time":
            fits[name] = fit_group_time(
                panel, control=est.control, outcome=base.outcome, se_method=est.se_method,
                n_boot=est.n_boot, seed=seed,
            )
    return fits


def _group_time_rows(gt, n_obs: int, n_clusters: int):
    """Aggregates of a group-time fit in the results-CSV layout."""
    from scipy import stats

    def row(term, att, se):
        t = att / se if se > 0 else math.nan
        p = 2 * stats.norm.sf(abs(t)) if se > 0 else math.nan
        return (term, att, se, t, p, n_obs, n_clusters)

    yield row("att", gt.overall.att, gt.overall.se)
    for e, agg in sorted(gt.by_event_time.items()):
        yield row(event_term(e), agg.att, agg.se)


def run_estimate(cfg: ExperimentConfig, out=None, panel: pd.DataFrame | None = None) -> dict[str, Path]:
    """Fit every configured estimator on the input panel, per stratum.

    Writes ``results_<estimator>_<stratum>.csv`` and, for the group-time
    estimator, ``group_time_<stratum>.csv`` with the cells.
    """
    if panel is None:
        src = cfg.resolve(cfg.estimate.panel)
        if not src.is_file():
            raise ConfigError(f"estimate.panel: no such file {src}")
        panel = io.read_panel(src)
    d = _out_dir(cfg, out)
    written = {}
    for stratum, sub in _strata(panel, cfg.estimate.stratify):
        fits = _fit_all(sub, cfg, cfg.seed)
        for name, fit in fits.items():
            key = f"{name}_{stratum}"
            if name == "group_time":
                written[f"group_time_{stratum}"] = io.write_group_time(
                    d / f"group_time_{stratum}.csv", fit
                )
                rows = _group_time_rows(fit, len(sub), int(sub["id"].nunique()))
            else:
                if fit.degenerate:
                    log.warning("%s: outcome has no within variation; estimates are degenerate", key)
                rows = fit.rows()
            written[f"results_{key}"] = io.write_results(d / f"results_{key}.csv", rows)
    return written


# --------------------------------------------------------------------------
# Monte Carlo


def _comparisons(fits: dict, truth: GroundTruth, cfg: ExperimentConfig, dgp: DgpSpec):
    """``(estimator, term, estimate, se, truth)`` for every fitted term with a known truth."""
    by_q = truth.att_by_event_time
    for name, fit in fits.items():
        if name == "twfe":
            yield name, fit.names[0], fit.coef[0], fit.se[0], truth.att
        elif name == "event_study":
            bins = list(cfg.regression.event_bins)
            for k, term in enumerate(fit.names):
                if not term.startswith("event["):
                    continue
                q = int(term[6:-1])
                if q < 0 and dgp.pretrend_slope == 0:
                    yield name, term, fit.coef[k], fit.se[k], 0.0
                elif q >= 0 and q in by_q and q != bins[-1]:
                    yield name, term, fit.coef[k], fit.se[k], by_q[q]
        elif name == "group_time":
            yield name, "att", fit.overall.att, fit.overall.se, truth.att
            for e, agg in sorted(fit.by_event_time.items()):
                if e >= 0 and e in by_q:
                    yield name, event_term(e), agg.att, agg.se, by_q[e]
        elif name == "interacted":
            constant = len(set(dgp.effect_profile)) == 1
            if (dgp.mode == "reduced_form" and constant
                    and cfg.regression.moderator_transform == "above_median"
                    and cfg.regression.moderator == "log_assets"):
                yield name, fit.names[0], fit.coef[0], fit.se[0], float(dgp.effect_profile[0])
                if len(fit.names) > 1:
                    yield name, fit.names[1], fit.coef[1], fit.se[1], dgp.moderator_shift


_WORKER_STATE: dict = {}


def _init_worker(cfg, vf):
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["vf"] = vf


def _replicate(r: int):
    cfg = _WORKER_STATE["cfg"]
    seed = cfg.seed + r
    try:
        dgp = replace(cfg.dgp, rng_seed=seed)
        panel, truth = _generate(dgp, cfg, _WORKER_STATE["vf"])
        out = []
        for stratum, sub in _strata(panel, cfg.estimate.stratify):
            t = truth if stratum == "pooled" else truth.restrict(sub)
            fits = _fit_all(sub, cfg, seed)
            for rec in _comparisons(fits, t, cfg, dgp):
                out.append((stratum,) + tuple(rec[:2]) + tuple(float(v) for v in rec[2:]))
        return out
    except Exception as exc:
        raise ReplicateError(r, seed, exc) from exc


@dataclass(frozen=True)
class MonteCarloReport:
    """Per-term summaries over replicates.

    ``bias`` is mean estimate minus mean truth, and ``coverage`` counts nominal
    95% intervals (normal critical value) that contain the replicate's truth.
    """

    table: pd.DataFrame
    replications: int
    seed: int

    def rows(self):
        for rec in self.table.itertuples(index=False):
            yield tuple(rec)

    def lookup(self, estimator: str, term: str, stratum: str = "pooled") -> pd.Series:
        t = self.table
        hit = t[(t.estimator == estimator) & (t.term == term) & (t.stratum == stratum)]
        if hit.empty:
            raise KeyError((stratum, estimator, term))
        return hit.iloc[0]


def _aggregate(records_by_rep: list[list[tuple]], replications: int, seed: int) -> MonteCarloReport:
    z = 1.959963984540054
    groups: dict[tuple, list] = {}
    for recs in records_by_rep:
        for stratum, est, term, b, se, truth in recs:
            groups.setdefault((stratum, est, term), []).append((b, se, truth))
    rows = []
    for (stratum, est, term), vals in groups.items():
        a = np.array(vals, dtype=float)
        b, se, tr = a[:, 0], a[:, 1], a[:, 2]
        n = len(b)
        mean_b = math.fsum(b) / n
        mean_t = math.fsum(tr) / n
        sd = float(np.std(b, ddof=1)) if n > 1 else math.nan
        covered = np.abs(b - tr) <= z * se
        rows.append((stratum, est, term, mean_t, mean_b, sd, math.fsum(se) / n,
                     float(covered.mean()), mean_b - mean_t, n))
    table = pd.DataFrame(rows, columns=list(MC_COLUMNS))
    return MonteCarloReport(table, replications, seed)


def run_montecarlo(cfg: ExperimentConfig, out=None, write: bool = True):
    """Replicate ``generate -> fit -> compare`` with seeds ``seed + r``.

    Results depend only on the config: replicates are gathered in index order
    whatever ``jobs`` is.  Any failing replicate aborts the run and nothing is
    written.
    """
    vf = solve_bellman(cfg.dynamic_params()) if cfg.dgp.mode == "structural" else None
    reps = range(cfg.replications)
    if cfg.jobs == 1:
        _init_worker(cfg, vf)
        records = [_replicate(r) for r in reps]
    else:
        with ProcessPoolExecutor(cfg.jobs, initializer=_init_worker, initargs=(cfg, vf)) as ex:
            futures = [ex.submit(_replicate, r) for r in reps]
            records = []
            try:
                for f in futures:
                    records.append(f.result())
            except BaseException:
                for f in futures:
                    f.cancel()
                raise
    report = _aggregate(records, cfg.replications, cfg.seed)
    if write:
        path = io.write_rows(_out_dir(cfg, out) / "montecarlo.csv", MC_COLUMNS, report.rows())
        return report, path
    return report, None


def run(cfg: ExperimentConfig, out=None):
    return {
        "sweep": run_sweep,
        "simulate": run_simulate,
        "estimate": run_estimate,
        "montecarlo": run_montecarlo,
    }[cfg.pipeline](cfg, out)
