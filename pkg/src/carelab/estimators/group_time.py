"""Unconditional group-time ATT with clean (never or not-yet treated) controls."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class Cell:
    g: int
    t: int
    base: int
    att: float
    se: float
    n_treated: int
    n_control: int

    @property
    def event_time(self) -> int:
        return self.t - self.g


@dataclass(frozen=True)
class Aggregate:
    att: float
    se: float
    weights: dict[tuple[int, int], float]


@dataclass(frozen=True)
class GroupTimeATT:
    """Cells ATT(g, t) plus weighted aggregations.

    Weights are each cell's treated count, normalized within the aggregate.
    ``overall`` pools every post-event cell (``t >= g``).
    """

    cells: tuple[Cell, ...]
    absent: dict[tuple[int, int], str]
    by_event_time: dict[int, Aggregate]
    overall: Aggregate
    control: str
    se_method: str
    n_boot: int = 0
    seed: int | None = None

    def cell(self, g: int, t: int) -> Cell:
        for c in self.cells:
            if c.g == g and c.t == t:
                return c
        if (g, t) in self.absent:
            raise KeyError(f"cell ({g}, {t}) is absent: {self.absent[(g, t)]}")
        raise KeyError((g, t))

    def rows(self):
        """``(g, t, event_time, att, se, weight)`` per cell; weight is its overall share."""
        w = self.overall.weights
        for c in self.cells:
            yield (c.g, c.t, c.event_time, c.att, c.se, w.get((c.g, c.t), 0.0))

    def event_rows(self):
        for e, agg in sorted(self.by_event_time.items()):
            yield (e, agg.att, agg.se)


@dataclass
class _CellData:
    g: int
    t: int
    base: int
    treated: np.ndarray  # unit positions
    control: np.ndarray
    dy: np.ndarray  # per-unit long difference, indexed by position


def _wide(panel, outcome, id_col, wave_col):
    wide = panel.pivot(index=id_col, columns=wave_col, values=outcome)
    return wide.sort_index(axis=1)


def fit_group_time(
    panel: pd.DataFrame,
    control: str = "never_treated",
    outcome: str = "employment",
    se_method: str = "bootstrap",
    n_boot: int = 499,
    seed: int | None = 0,
    id_col: str = "id",
    wave_col: str = "wave",
    group_col: str = "event_wave",
) -> GroupTimeATT:
    """ATT(g, t) = treated minus control change in mean outcome from ``base`` to ``t``.

    ``base`` is the last wave before ``g``.  Each cell uses the units observed
    at both ``t`` and ``base``.  ``se_method`` is ``"bootstrap"`` (multinomial
    cluster bootstrap over ids with fixed aggregation weights),
    ``"influence"`` or ``"none"``.
    """
    if control not in ("never_treated", "not_yet_treated"):
        raise ValueError(f"unknown control group {control!r}")
    if se_method not in ("bootstrap", "influence", "none"):
        raise ValueError(f"unknown se_method {se_method!r}")
    if se_method == "bootstrap" and seed is None:
        raise ValueError("bootstrap standard errors need an explicit seed")
    if panel.duplicated([id_col, wave_col]).any():
        raise ValueError("panel has duplicate (id, wave) rows")

    wide = _wide(panel, outcome, id_col, wave_col)
    waves = [int(w) for w in wide.columns]
    Y = wide.to_numpy(dtype=float)
    groups = panel.groupby(id_col)[group_col].first().reindex(wide.index)
    G = groups.to_numpy(dtype=float, na_value=np.nan)
    never = np.isnan(G)
    n_units = len(wide)

    cells: list[_CellData] = []
    absent: dict[tuple[int, int], str] = {}
    for g in sorted({int(x) for x in G[~never]}):
        if g not in waves:
            raise ValueError(f"event wave {g} is not a panel wave")
        k = waves.index(g)
        if k == 0:
            for t in waves:
                absent[(g, t)] = "cohort treated in the first wave has no pre-period"
            continue
        base = waves[k - 1]
        kb = k - 1
        for kt, t in enumerate(waves):
            if t == base:
                continue
            seen = ~np.isnan(Y[:, kt]) & ~np.isnan(Y[:, kb])
            treated = np.flatnonzero(seen & (G == g))
            if control == "never_treated":
                pool = never
            else:
                pool = never | (G > max(t, base))
            ctrl = np.flatnonzero(seen & pool & (G != g))
            if treated.size == 0:
                absent[(g, t)] = "no treated units observed at both waves"
                continue
            if ctrl.size == 0:
                absent[(g, t)] = "empty control set"
                continue
            dy = Y[:, kt] - Y[:, kb]
            cells.append(_CellData(g, t, base, treated, ctrl, dy))

    if not cells:
        raise ValueError("no estimable group-time cell")

    att = np.array([c.dy[c.treated].mean() - c.dy[c.control].mean() for c in cells])

    # Per-unit influence of each cell's estimate (rows: cells, cols: units).
    psi = np.zeros((len(cells), n_units))
    for r, c in enumerate(cells):
        mt, mc = c.dy[c.treated].mean(), c.dy[c.control].mean()
        psi[r, c.treated] += (c.dy[c.treated] - mt) / c.treated.size
        psi[r, c.control] -= (c.dy[c.control] - mc) / c.control.size

    boot = None
    if se_method == "bootstrap":
        boot = _bootstrap(cells, n_units, n_boot, seed)

    def se_of(weight_vec):
        if se_method == "none":
            return float("nan")
        if se_method == "influence":
            return float(np.sqrt(np.sum((weight_vec @ psi) ** 2)))
        draws = boot @ weight_vec
        return float(np.nanstd(draws, ddof=1))

    counts = np.array([c.treated.size for c in cells], dtype=float)
    keys = [(c.g, c.t) for c in cells]
    ev = np.array([c.t - c.g for c in cells])

    def aggregate(mask):
        w = np.where(mask, counts, 0.0)
        w = w / w.sum()
        return Aggregate(
            att=float(w @ att),
            se=se_of(w),
            weights={keys[r]: float(w[r]) for r in np.flatnonzero(mask)},
        )

    out_cells = tuple(
        Cell(
            c.g, c.t, c.base, float(att[r]), se_of(np.eye(len(cells))[r]),
            int(c.treated.size), int(c.control.size),
        )
        for r, c in enumerate(cells)
    )
    by_e = {int(e): aggregate(ev == e) for e in np.unique(ev)}
    post = ev >= 0
    if not post.any():
        raise ValueError("no post-event cell is estimable")
    return GroupTimeATT(
        cells=out_cells,
        absent=absent,
        by_event_time=by_e,
        overall=aggregate(post),
        control=control,
        se_method=se_method,
        n_boot=n_boot if se_method == "bootstrap" else 0,
        seed=seed,
    )


def _bootstrap(cells, n_units, n_boot, seed) -> np.ndarray:
    """Cell estimates under ``n_boot`` multinomial resamples of units."""
    rng = np.random.default_rng(seed)
    W = rng.multinomial(n_units, np.full(n_units, 1.0 / n_units), size=n_boot).astype(float)
    out = np.empty((n_boot, len(cells)))
    for r, c in enumerate(cells):
        dy = np.nan_to_num(c.dy)
        for sign, idx in ((1.0, c.treated), (-1.0, c.control)):
            wsum = W[:, idx].sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                m = (W[:, idx] @ dy[idx]) / wsum
            out[:, r] = m if sign > 0 else out[:, r] - m
    return out
