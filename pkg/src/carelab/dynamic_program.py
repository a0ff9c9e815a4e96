"""Finite-horizon dynamic household model solved by backward induction.

State: parental health ``z``, savings carried in ``A_prev`` (asset-grid index)
and each spouse's experience (experience-grid indices); education is fixed
per household.  Wages follow a log-linear Mincer law in education and
experience, experience accrues with work and depreciates every period, and
parental health follows an age-indexed Markov chain whose transition depends
on whether the household provides care.

One model period is two years.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model_core import (
    ALTERNATIVES,
    HouseholdParams,
    InfeasibleChoiceError,
    ShockDistribution,
    consumption_utility,
    expected_maximum,
)

PERIOD_YEARS = 2


@dataclass(frozen=True)
class MincerCoeffs:
    """``log wage = const + educ*E + exp*X + exp2*X**2``."""

    const: float = 0.0
    educ: float = 0.0
    exp: float = 0.0
    exp2: float = 0.0


def mincer_wage(E, X, coeffs: MincerCoeffs):
    E = np.asarray(E, dtype=float)
    X = np.asarray(X, dtype=float)
    if np.any(E < 0) or np.any(X < 0):
        raise ValueError("education and experience must be non-negative")
    out = np.exp(coeffs.const + coeffs.educ * E + coeffs.exp * X + coeffs.exp2 * X**2)
    return out if out.ndim else float(out)


def transition_experience(X, worked, delta: float, lambda_dep: float):
    """Next-period experience ``max(0, X + delta*worked - lambda_dep)``."""
    out = np.maximum(0.0, np.asarray(X, dtype=float) + delta * np.asarray(worked) - lambda_dep)
    return out if out.ndim else float(out)


def snap_to_grid(x, grid):
    """Nearest grid index for ``x`` (lower index on exact ties) and the snap error."""
    grid = np.asarray(grid, dtype=float)
    x = np.asarray(x, dtype=float)
    idx = np.clip(np.searchsorted(grid, x), 1, grid.size - 1) if grid.size > 1 else np.zeros(x.shape, int)
    if grid.size > 1:
        left = grid[idx - 1]
        right = grid[idx]
        idx = np.where(x - left <= right - x, idx - 1, idx)
    err = np.abs(x - grid[idx])
    if idx.ndim == 0:
        return int(idx), float(err)
    return idx, err


@dataclass(frozen=True)
class HealthTransition:
    """``P(z'=1 | z, d)`` per period, shape ``(n_periods, 2, 2)`` indexed ``[t, z, d]``.

    Periods past the end of the table reuse its last row.
    """

    p: np.ndarray
    start_age: float = 50.0

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.shape == (2, 2):
            p = p[None]
        if p.ndim != 3 or p.shape[1:] != (2, 2):
            raise ValueError("health transition table must have shape (n, 2, 2)")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.any(p[:, 1, :] <= p[:, 0, :]):
            raise ValueError("poor health must be persistent: p(1|1,d) > p(1|0,d)")
        if np.any(p[:, 1, 1] >= p[:, 1, 0]):
            raise ValueError("care must aid recovery: p(1|1,1) < p(1|1,0)")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def constant(cls, p00, p01, p10, p11, start_age: float = 50.0):
        """Time-invariant chain from ``p{z}{d} = P(z'=1 | z, d)``."""
        return cls(np.array([[p00, p01], [p10, p11]]), start_age)

    @classmethod
    def default(cls, n_periods: int = 21, start_age: float = 50.0):
        """Age-indexed calibration for parents aged 50 onward.

        Onset and persistence both rise with age; care cuts persistence by a
        fifth.  Hospitalization reaches about 20% at 70.
        """
        age = start_age + PERIOD_YEARS * np.arange(n_periods)
        onset = 1 / (1 + np.exp(-(-2.75 + 0.045 * (age - 50))))
        persist = 1 / (1 + np.exp(-(-0.55 + 0.06 * (age - 50))))
        p = np.empty((n_periods, 2, 2))
        p[:, 0, 0] = p[:, 0, 1] = onset
        p[:, 1, 0] = persist
        p[:, 1, 1] = 0.8 * persist
        return cls(p, start_age)

    @property
    def n_periods(self) -> int:
        return self.p.shape[0]

    def at(self, t: int) -> np.ndarray:
        return self.p[min(t, self.n_periods - 1)]

    def age(self, t):
        return self.start_age + PERIOD_YEARS * np.asarray(t)


@dataclass(frozen=True)
class DynamicParams:
    """Primitives of the dynamic model.

    ``static`` supplies preferences, time budgets, medical cost and the shock
    distribution; its wage rates are ignored in favour of the Mincer law.
    Terminal value is ``bequest * (1 + r) * A``.
    """

    static: HouseholdParams
    health: HealthTransition
    horizon: int = 10
    rho: float = 0.9
    r: float = 0.04
    delta: float = 2.0
    lambda_dep: float | Sequence[float] = 1.0
    asset_grid: Sequence[float] = (0.0, 0.5, 1.0, 2.0)
    exp_grid: Sequence[float] = tuple(float(x) for x in range(0, 21))
    educ_i: float = 9.0
    educ_j: float = 9.0
    mincer_i: MincerCoeffs = field(default_factory=MincerCoeffs)
    mincer_j: MincerCoeffs = field(default_factory=MincerCoeffs)
    bequest: float = 0.0

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise ValueError("discount factor must lie in [0, 1)")
        if self.horizon < 1:
            raise ValueError("horizon must be at least one period")
        if self.delta < 0:
            raise ValueError("experience accrual must be non-negative")
        lam = np.broadcast_to(np.asarray(self.lambda_dep, dtype=float), (self.horizon,))
        if np.any(lam < 0):
            raise ValueError("depreciation must be non-negative")
        for name in ("asset_grid", "exp_grid"):
            g = np.asarray(getattr(self, name), dtype=float)
            if g.ndim != 1 or g.size == 0 or np.any(np.diff(g) <= 0):
                raise ValueError(f"{name} must be a non-empty strictly increasing sequence")
        if np.asarray(self.exp_grid)[0] < 0:
            raise ValueError("experience grid must be non-negative")

    def depreciation(self, t: int) -> float:
        lam = np.broadcast_to(np.asarray(self.lambda_dep, dtype=float), (self.horizon,))
        return float(lam[t])

    @property
    def assets(self) -> np.ndarray:
        return np.asarray(self.asset_grid, dtype=float)

    @property
    def experience(self) -> np.ndarray:
        return np.asarray(self.exp_grid, dtype=float)

    def wages(self) -> tuple[np.ndarray, np.ndarray]:
        """Wage rates of each spouse on the experience grid."""
        X = self.experience
        return mincer_wage(self.educ_i, X, self.mincer_i), mincer_wage(self.educ_j, X, self.mincer_j)

    def next_experience(self, t: int) -> tuple[np.ndarray, float]:
        """Grid index map ``[x_idx, worked]`` for period ``t`` and its max snap error."""
        X = self.experience
        nxt = np.empty((X.size, 2), dtype=int)
        worst = 0.0
        for w in (0, 1):
            raw = transition_experience(X, w, self.delta, self.depreciation(t))
            idx, err = snap_to_grid(raw, X)
            nxt[:, w] = idx
            worst = max(worst, float(np.max(err)))
        return nxt, worst


@dataclass(frozen=True)
class DynamicState:
    z: int
    a_idx: int
    xi_idx: int
    xj_idx: int
    t: int = 0

    def check(self, params: DynamicParams):
        nA, nX = params.assets.size, params.experience.size
        ok = (
            self.z in (0, 1)
            and 0 <= self.a_idx < nA
            and 0 <= self.xi_idx < nX
            and 0 <= self.xj_idx < nX
            and 0 <= self.t <= params.horizon
        )
        if not ok:
            raise IndexError(f"state {self} lies off the model grid")


@dataclass(frozen=True)
class ValueFunction:
    """Solved model.

    ``value[t, z, a, xi, xj]`` for ``t = 0..T`` (layer ``T`` is terminal);
    ``policy``, ``alt_values`` and ``savings`` are indexed
    ``[t, z, a, xi, xj, alt]`` for decision periods ``t < T`` with
    alternatives in ``ALTERNATIVES`` order.  ``savings`` holds the chosen
    next-period asset index conditional on each alternative.
    """

    params: DynamicParams
    value: np.ndarray
    policy: np.ndarray
    alt_values: np.ndarray
    savings: np.ndarray
    snap_error: float

    def rows(self):
        """Long-format rows ``(t, z, a, xi, xj, value, p_ww, p_wc, p_cw, p_cc)``."""
        T = self.params.horizon
        it = np.ndindex(self.value.shape)
        for t, z, a, xi, xj in it:
            v = float(self.value[t, z, a, xi, xj])
            if t < T:
                p = tuple(float(x) for x in self.policy[t, z, a, xi, xj])
            else:
                p = (None,) * 4
            yield (t, z, a, xi, xj, v) + p


def _flow_consumption(params: DynamicParams) -> np.ndarray:
    """Consumption ``c[z, a, a', xi, xj, alt]`` from the dynamic budget."""
    st = params.static
    A = params.assets
    phi_i, phi_j = params.wages()
    out = np.empty((2, A.size, A.size, phi_i.size, phi_j.size, 4))
    resources = (1 + params.r) * A[:, None] - A[None, :]  # (a, a')
    for k, (w_i, w_j) in enumerate(ALTERNATIVES):
        earn = (
            phi_i[:, None] * (st.T_i - st.Td_i * (1 - w_i))
            + phi_j[None, :] * (st.T_j - st.Td_j * (1 - w_j))
        )
        for z in (0, 1):
            out[z, ..., k] = resources[:, :, None, None] + earn[None, None] - st.M(z)
    return out


def solve_bellman(params: DynamicParams) -> ValueFunction:
    """Backward induction over the full state grid.

    Savings are chosen on the asset grid for each work/care alternative; the
    expected maximum over the disutility shocks is then taken across the four
    alternatives.  Deterministic: no random numbers are drawn.
    """
    st = params.static
    A = params.assets
    nA, nX, T = A.size, params.experience.size, params.horizon

    c = _flow_consumption(params)
    feasible = c > 0
    u_c = np.full(c.shape, -np.inf)
    u_c[feasible] = consumption_utility(c[feasible], st.curvature)
    care = np.array([1 - (wi * wj) for wi, wj in ALTERNATIVES])  # household d
    altruism = np.array([[st.gamma * st.care_utility(z, d) for d in care] for z in (0, 1)])
    flow = u_c + altruism[:, None, None, None, None, :]

    value = np.empty((T + 1, 2, nA, nX, nX))
    value[T] = params.bequest * (1 + params.r) * A[None, :, None, None]
    policy = np.empty((T, 2, nA, nX, nX, 4))
    alt_values = np.empty_like(policy)
    savings = np.empty(policy.shape, dtype=int)
    snap = 0.0

    for t in range(T - 1, -1, -1):
        nxt, err = params.next_experience(t)
        snap = max(snap, err)
        p1 = params.health.at(t)  # [z, d]
        V1 = value[t + 1]
        total = np.empty((2, nA, nA, nX, nX, 4))
        for k, (w_i, w_j) in enumerate(ALTERNATIVES):
            Vn = V1[:, :, nxt[:, w_i], :][:, :, :, nxt[:, w_j]]  # (z', a', xi, xj)
            d = care[k]
            for z in (0, 1):
                ev = p1[z, d] * Vn[1] + (1 - p1[z, d]) * Vn[0]  # (a', xi, xj)
                total[z, :, :, :, :, k] = flow[z, :, :, :, :, k] + params.rho * ev[None]
        best_a = np.argmax(total, axis=2)
        v_alt = np.take_along_axis(total, best_a[:, :, None], axis=2)[:, :, 0]
        bad = ~np.isfinite(v_alt).any(axis=-1)
        if np.any(bad):
            z, a, xi, xj = (int(i) for i in np.argwhere(bad)[0])
            raise InfeasibleChoiceError(
                f"empty feasible set at t={t}, z={z}, a_idx={a}, xi_idx={xi}, xj_idx={xj}"
            )
        emax, probs = expected_maximum(v_alt, st.shocks)
        value[t] = emax
        policy[t] = probs
        alt_values[t] = v_alt
        savings[t] = best_a

    for arr in (value, policy, alt_values, savings):
        arr.setflags(write=False)
    return ValueFunction(params, value, policy, alt_values, savings, snap)


@dataclass(frozen=True)
class ReturnDecomposition:
    consumption_gain: float
    altruism_loss: float
    future_return: float

    @property
    def total(self) -> float:
        return self.consumption_gain - self.altruism_loss + self.future_return


def dynamic_return_to_work(vf: ValueFunction, state: DynamicState) -> ReturnDecomposition:
    """Wife's return to work with the husband working, split into its three parts.

    Each alternative uses its own optimal savings choice, so the parts sum to
    the difference of the two alternative values.
    """
    params = vf.params
    state.check(params)
    if state.t >= params.horizon:
        raise IndexError("no decision is taken in the terminal period")
    st = params.static
    A = params.assets
    phi_i, phi_j = params.wages()
    t, z, a, xi, xj = state.t, state.z, state.a_idx, state.xi_idx, state.xj_idx

    parts = {}
    for k, (w_i, w_j) in ((0, (1, 1)), (1, (1, 0))):
        a_next = int(vf.savings[t, z, a, xi, xj, k])
        c = (
            phi_i[xi] * st.T_i
            + phi_j[xj] * (st.T_j - st.Td_j * (1 - w_j))
            + (1 + params.r) * A[a]
            - A[a_next]
            - st.M(z)
        )
        u = consumption_utility(c, st.curvature) if c > 0 else -np.inf
        cont = vf.alt_values[t, z, a, xi, xj, k] - u - st.gamma * st.care_utility(z, 1 - w_j)
        parts[w_j] = (u, cont)
    return ReturnDecomposition(
        consumption_gain=float(parts[1][0] - parts[0][0]),
        altruism_loss=float(st.gamma * st.care_utility.care_gain(z)),
        future_return=float(parts[1][1] - parts[0][1]),
    )


@dataclass(frozen=True)
class HealthPathStats:
    paths: np.ndarray  # (n_paths, T + 1) of z
    ages: np.ndarray
    uncond_rate: np.ndarray
    cond_rate: np.ndarray  # nan in period 0 or where no path was sick before

    def rows(self):
        for age, u, c in zip(self.ages, self.uncond_rate, self.cond_rate):
            yield int(age), float(u), None if np.isnan(c) else float(c)


def simulate_health_path(
    chain: HealthTransition,
    care_policy: float | Callable[[int, np.ndarray], np.ndarray] | None = 0.5,
    T: int = 20,
    rng_seed: int = 0,
    n_paths: int = 1,
    z0: int = 0,
) -> HealthPathStats:
    """Simulate parental health.

    ``care_policy`` gives the probability of household care: ``None`` for no
    care, a number for the care probability while parents are sick, or a
    callable ``(t, z) -> prob``.
    """
    rng = np.random.default_rng(rng_seed)
    z = np.empty((n_paths, T + 1), dtype=np.int8)
    z[:, 0] = z0
    for t in range(T):
        cur = z[:, t]
        if care_policy is None:
            pc = np.zeros(n_paths)
        elif callable(care_policy):
            pc = np.broadcast_to(np.asarray(care_policy(t, cur), dtype=float), (n_paths,))
        else:
            pc = float(care_policy) * cur
        d = (rng.random(n_paths) < pc).astype(int)
        p = chain.at(t)[cur, d]
        z[:, t + 1] = rng.random(n_paths) < p
    uncond = z.mean(axis=0)
    cond = np.full(T + 1, np.nan)
    prev = z[:, :-1] == 1
    counts = prev.sum(axis=0)
    with np.errstate(invalid="ignore"):
        cond[1:] = np.where(counts > 0, (z[:, 1:] * prev).sum(axis=0) / np.maximum(counts, 1), np.nan)
    return HealthPathStats(z, chain.age(np.arange(T + 1)), uncond, cond)


def default_dynamic_params(**overrides) -> DynamicParams:
    """Calibration used by the structural panel generator."""
    from .model_core import CareUtility

    static = HouseholdParams(
        gamma=1.0,
        phi_i=1.0,
        phi_j=1.0,
        medical_cost=0.15,
        care_utility=CareUtility(u00=0.0, u01=0.05, u10=-0.6, u11=-0.35),
        curvature=2.0,
        shocks=ShockDistribution("logistic", scale=0.3),
    )
    base = dict(
        static=static,
        health=HealthTransition.default(),
        horizon=10,
        rho=0.9,
        r=0.04,
        delta=2.0,
        lambda_dep=1.0,
        asset_grid=(0.0, 0.25, 0.5, 1.0, 1.5, 2.0),
        exp_grid=tuple(float(x) for x in range(0, 31)),
        educ_i=9.0,
        educ_j=9.0,
        mincer_i=MincerCoeffs(const=-0.7, educ=0.06, exp=0.03, exp2=-0.0005),
        mincer_j=MincerCoeffs(const=-1.1, educ=0.06, exp=0.03, exp2=-0.0005),
        bequest=0.0,
    )
    base.update(overrides)
    return DynamicParams(**base)


__all__ = [
    "PERIOD_YEARS",
    "DynamicParams",
    "DynamicState",
    "HealthPathStats",
    "HealthTransition",
    "MincerCoeffs",
    "ReturnDecomposition",
    "ValueFunction",
    "default_dynamic_params",
    "dynamic_return_to_work",
    "mincer_wage",
    "simulate_health_path",
    "snap_to_grid",
    "solve_bellman",
    "transition_experience",
]
