"""Two-way fixed-effects regressions: static DiD, event study, interactions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import pandas as pd
import scipy.linalg
from scipy import stats

from .within import Absorber, _codes, cluster_covariance

# Pivots below this fraction of the largest one are treated as collinear.
RANK_TOL = 1e-9


@dataclass(frozen=True)
class RegressionSpec:
    """What to regress.

    ``treatment`` is ``"static"`` (``D_it``), ``"event"`` (event-time dummies
    in ``event_bins``, the end bins pooling everything beyond them, with
    ``reference`` omitted) or ``"interacted"`` (``D_it`` plus ``D_it`` times a
    time-invariant ``moderator``).  ``moderator_transform`` is ``"center"``
    (subtract the median across units), ``"above_median"`` (indicator) or
    ``"none"``.  ``sample`` is a boolean row filter: a callable on the panel or
    a ``DataFrame.query`` string.
    """

    outcome: str = "employment"
    treatment: str = "static"
    covariates: Sequence[str] = ()
    id_col: str = "id"
    wave_col: str = "wave"
    cluster_col: str = "id"
    treat_col: str = "d_it"
    event_col: str = "event_time"
    event_bins: Sequence[int] = (-8, -6, -4, 0, 2, 4, 6, 8)
    reference: int = -2
    moderator: str | None = None
    moderator_transform: str = "center"
    sample: Callable[[pd.DataFrame], pd.Series] | str | None = None
    tol: float = 1e-10
    max_sweeps: int = 10_000

    def __post_init__(self):
        if self.treatment not in ("static", "event", "interacted"):
            raise ValueError(f"unknown treatment mode {self.treatment!r}")
        if self.treatment == "event":
            bins = list(self.event_bins)
            if self.reference in bins:
                raise ValueError("the reference period cannot be one of the event bins")
            if sorted(set(bins)) != bins or not bins:
                raise ValueError("event_bins must be strictly increasing")
        if self.treatment == "interacted" and not self.moderator:
            raise ValueError("interacted specification needs a moderator column")
        if self.moderator_transform not in ("center", "above_median", "none"):
            raise ValueError(f"unknown moderator transform {self.moderator_transform!r}")


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    coef: np.ndarray
    cov: np.ndarray
    n_obs: int
    n_clusters: int
    n_singletons: int
    dropped: tuple[str, ...]
    absent: dict[str, str]
    r2_within: float
    resid: np.ndarray
    fitted: np.ndarray
    degenerate: bool = False
    sweeps: int = 0

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def tstat(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.se > 0, self.coef / self.se, np.nan)

    @property
    def pvalue(self) -> np.ndarray:
        return 2 * stats.t.sf(np.abs(self.tstat), df=self.n_clusters - 1)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            if name in self.absent:
                raise KeyError(f"{name} is absent: {self.absent[name]}") from None
            if name in self.dropped:
                raise KeyError(f"{name} was dropped as collinear") from None
            raise KeyError(name) from None

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.index(name)])

    def stderr(self, name: str) -> float:
        return float(self.se[self.index(name)])

    def conf_int(self, level: float = 0.95) -> np.ndarray:
        q = stats.t.ppf(0.5 + level / 2, df=self.n_clusters - 1)
        return np.column_stack([self.coef - q * self.se, self.coef + q * self.se])

    def summary(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"estimate": self.coef, "se": self.se, "t": self.tstat, "p": self.pvalue},
            index=pd.Index(self.names, name="term"),
        )

    def rows(self):
        """``(term, estimate, se, t, p, n_obs, n_clusters)`` per retained term."""
        for k, name in enumerate(self.names):
            yield (
                name,
                float(self.coef[k]),
                float(self.se[k]),
                float(self.tstat[k]),
                float(self.pvalue[k]),
                self.n_obs,
                self.n_clusters,
            )


def _select(panel: pd.DataFrame, spec: RegressionSpec, needed: Sequence[str]) -> pd.DataFrame:
    df = panel
    if spec.sample is not None:
        mask = df.eval(spec.sample) if isinstance(spec.sample, str) else spec.sample(df)
        df = df.loc[np.asarray(mask, dtype=bool)]
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise KeyError(f"panel lacks columns {missing}")
    cols = [spec.outcome, *spec.covariates]
    return df.loc[df[cols].notna().all(axis=1)]


def _fit(df: pd.DataFrame, spec: RegressionSpec, terms: dict[str, np.ndarray], absent=None):
    names = list(terms) + list(spec.covariates)
    if not names:
        raise ValueError("no regressors requested")
    X = np.column_stack(
        [terms[k] for k in terms] + [df[c].to_numpy(dtype=float) for c in spec.covariates]
    ) if names else np.empty((len(df), 0))
    y = df[spec.outcome].to_numpy(dtype=float)
    ids = df[spec.id_col].to_numpy()
    clusters = df[spec.cluster_col].to_numpy()

    absorb = Absorber(ids, df[spec.wave_col].to_numpy(), tol=spec.tol, max_sweeps=spec.max_sweeps)
    Z = absorb(np.column_stack([y, X]))
    yt, Xt = Z[:, 0], Z[:, 1:]

    # Columns wiped out by the fixed effects, then pivoted QR for the rest.
    raw_norm = np.linalg.norm(X, axis=0)
    alive = np.linalg.norm(Xt, axis=0) > RANK_TOL * np.maximum(raw_norm, 1e-300)
    keep = np.flatnonzero(alive)
    if keep.size:
        _, R, piv = scipy.linalg.qr(Xt[:, keep], mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > RANK_TOL * diag[0])) if diag.size else 0
        keep = np.sort(keep[piv[:rank]])
    if keep.size == 0:
        raise ValueError("every regressor is collinear with the fixed effects")
    dropped = tuple(names[k] for k in range(len(names)) if k not in set(keep))
    Xk = Xt[:, keep]

    G = _codes(clusters).max() + 1
    if G < 2:
        raise ValueError("need at least two clusters")
    bread = np.linalg.inv(Xk.T @ Xk)
    coef = bread @ (Xk.T @ yt)
    resid = yt - Xk @ coef
    tss = float(yt @ yt)
    degenerate = tss <= 1e-20 * max(1.0, float(y @ y))
    cov = cluster_covariance(Xk, resid, clusters, bread)
    n_single = int(np.sum(np.bincount(_codes(ids)) == 1))
    return RegressionResult(
        names=tuple(names[k] for k in keep),
        coef=coef,
        cov=cov,
        n_obs=len(df),
        n_clusters=int(G),
        n_singletons=n_single,
        dropped=dropped,
        absent=dict(absent or {}),
        r2_within=float(1 - resid @ resid / tss) if not degenerate else 0.0,
        resid=resid,
        fitted=y - resid,
        degenerate=bool(degenerate),
        sweeps=absorb.sweeps,
    )


def fit_twfe(panel: pd.DataFrame, spec: RegressionSpec = RegressionSpec()) -> RegressionResult:
    """Static two-way fixed-effects DiD of the outcome on ``D_it`` and controls."""
    if spec.treatment != "static":
        raise ValueError("fit_twfe expects a static specification")
    df = _select(panel, spec, [spec.outcome, spec.treat_col, spec.id_col, spec.wave_col])
    return _fit(df, spec, {spec.treat_col: df[spec.treat_col].to_numpy(dtype=float)})


def event_term(q: int) -> str:
    return f"event[{q:+d}]" if q else "event[0]"


def event_dummies(event_time: pd.Series, bins: Sequence[int], reference: int):
    """Binned event-time dummies; rows with missing event time get zeros."""
    bins = list(bins)
    q = event_time.to_numpy(dtype=float, na_value=np.nan)
    has = ~np.isnan(q)
    lo, hi = bins[0], bins[-1]
    qq = np.where(has, np.clip(q, lo, hi), np.nan)
    covered = np.isin(qq[has], bins) | (q[has] == reference)
    if not covered.all():
        stray = sorted(set(q[has][~covered].astype(int)))
        raise ValueError(f"event times {stray} fall between bins; adjust event_bins")
    if reference < lo or reference > hi:
        raise ValueError("reference period must lie inside the binned window")
    return {b: (has & (qq == b) & (q != reference)).astype(float) for b in bins}


def fit_event_study(panel: pd.DataFrame, spec: RegressionSpec) -> RegressionResult:
    """Event-study regression with the reference period omitted.

    Bins with no observations are reported in ``absent`` rather than as zeros.
    """
    if spec.treatment != "event":
        raise ValueError("fit_event_study expects an event specification")
    df = _select(panel, spec, [spec.outcome, spec.event_col, spec.id_col, spec.wave_col])
    dummies = event_dummies(df[spec.event_col], spec.event_bins, spec.reference)
    terms, absent = {}, {}
    for b, col in dummies.items():
        if col.any():
            terms[event_term(b)] = col
        else:
            absent[event_term(b)] = "no observations in this event-time bin"
    if not terms:
        raise ValueError("no event-time bin has observations")
    return _fit(df, spec, terms, absent)


def average_within_id(panel: pd.DataFrame, column: str, id_col: str = "id") -> pd.Series:
    """Per-row copy of each unit's mean of ``column`` over its waves."""
    return panel.groupby(id_col)[column].transform("mean")


def fit_interacted(panel: pd.DataFrame, spec: RegressionSpec) -> RegressionResult:
    """``D_it`` plus ``D_it`` times a time-invariant moderator.

    The moderator's main effect is absorbed by the unit fixed effects.
    """
    if spec.treatment != "interacted":
        raise ValueError("fit_interacted expects an interacted specification")
    m = spec.moderator
    df = _select(panel, spec, [spec.outcome, spec.treat_col, m, spec.id_col, spec.wave_col])
    spread = df.groupby(spec.id_col)[m].agg(lambda s: s.max() - s.min())
    scale = max(1.0, float(np.abs(df[m]).max()))
    if np.any(spread.to_numpy() > 1e-12 * scale):
        raise ValueError(
            f"moderator {m!r} varies within id; average it over each unit's waves first "
            "(see average_within_id)"
        )
    unit_m = df.groupby(spec.id_col)[m].first()
    med = float(np.median(unit_m.to_numpy()))
    raw = df[m].to_numpy(dtype=float)
    if spec.moderator_transform == "center":
        mod = raw - med
    elif spec.moderator_transform == "above_median":
        mod = (raw > med).astype(float)
    else:
        mod = raw
    d = df[spec.treat_col].to_numpy(dtype=float)
    return _fit(df, spec, {spec.treat_col: d, f"{spec.treat_col}:{m}": d * mod})


@dataclass(frozen=True)
class PretrendTest:
    terms: tuple[str, ...]
    wald: float
    df: int
    pvalue: float
    individual_pvalues: np.ndarray = field(repr=False)

    def reject(self, alpha: float = 0.05) -> bool:
        return self.pvalue < alpha

    def any_individual_reject(self, alpha: float = 0.05) -> bool:
        return bool(np.any(self.individual_pvalues < alpha))


def pretrend_test(result: RegressionResult) -> PretrendTest:
    """Joint Wald test that every retained pre-event coefficient is zero."""
    idx = [
        k
        for k, n in enumerate(result.names)
        if n.startswith("event[") and int(n[6:-1]) < 0
    ]
    if not idx:
        raise ValueError("result has no pre-event coefficients")
    b = result.coef[idx]
    V = result.cov[np.ix_(idx, idx)]
    wald = float(b @ np.linalg.pinv(V) @ b)
    return PretrendTest(
        terms=tuple(result.names[k] for k in idx),
        wald=wald,
        df=len(idx),
        pvalue=float(stats.chi2.sf(wald, len(idx))),
        individual_pvalues=result.pvalue[idx],
    )
