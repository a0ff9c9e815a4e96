"""Static cooperative household model of work versus eldercare.

Two spouses, ``i`` (husband) and ``j`` (wife), each either work (``w=1``) or
provide care (``d=1``).  The household maximizes

    U(c) + gamma * u(z, d) - eps_i * w_i - eps_j * w_j

subject to ``c = Y + wealth - M(z) - phi_i*Td_i*d_i - phi_j*Td_j*d_j``, where
``d = 1`` when at least one spouse cares and ``z = 1`` flags poor parental
health.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import special

# Alternatives as (w_i, w_j), ordered by tie-break preference.
ALTERNATIVES: tuple[tuple[int, int], ...] = ((1, 1), (1, 0), (0, 1), (0, 0))
ALTERNATIVE_LABELS = ("ww", "wc", "cw", "cc")

# Nodes of the Gauss-Legendre rule used on each chunk of the inner segment.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_MAX_CHUNKS = 80
# Shocks beyond this many scale units carry no mass in double precision.
_SUPPORT = 40.0
# Standard-normal truncation for copula-space quadrature.
_GAUSS_BOX = 8.5


class InfeasibleChoiceError(ValueError):
    """Raised when a required alternative leaves non-positive consumption."""


class QuadratureError(RuntimeError):
    """Raised when the shock quadrature fails its self-consistency check."""


class WorkerType(str, enum.Enum):
    ALWAYS_WORKER = "AlwaysWorker"
    COMPLIER = "Complier"
    ALWAYS_CAREGIVER = "AlwaysCaregiver"
    DEFIER = "Defier"


@dataclass(frozen=True)
class CareUtility:
    """Parental utility ``u(z, d)`` from health ``z`` and received care ``d``."""

    u00: float = 0.0
    u01: float = 0.2
    u10: float = -1.0
    u11: float = -0.4

    def __post_init__(self):
        vals = (self.u00, self.u01, self.u10, self.u11)
        if not all(np.isfinite(vals)):
            raise ValueError("care utilities must be finite")
        gain0 = self.u01 - self.u00
        gain1 = self.u11 - self.u10
        if gain0 < 0 or gain1 < 0:
            raise ValueError("care utility must be increasing in d")
        if gain1 < gain0:
            raise ValueError(
                "care utility must be supermodular: u(1,1)-u(1,0) >= u(0,1)-u(0,0)"
            )

    def __call__(self, z, d):
        table = np.array([[self.u00, self.u01], [self.u10, self.u11]])
        return table[np.asarray(z, dtype=int), np.asarray(d, dtype=int)]

    def care_gain(self, z: int) -> float:
        return float(self(z, 1) - self(z, 0))


@dataclass(frozen=True)
class ShockDistribution:
    """Distribution of the idiosyncratic work disutilities ``(eps_i, eps_j)``.

    ``kind`` is ``"logistic"`` or ``"normal"``; ``scale`` is the logistic scale
    or the normal standard deviation, and ``scale == 0`` makes both shocks
    degenerate at zero.  ``corr`` couples the spouses through a Gaussian
    copula.
    """

    kind: str = "logistic"
    scale: float = 1.0
    corr: float = 0.0
    quadrature_order: int = 24
    quadrature_tol: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("logistic", "normal"):
            raise ValueError(f"unknown shock distribution {self.kind!r}")
        if not self.scale >= 0:
            raise ValueError("shock scale must be non-negative")
        if not -1 < self.corr < 1:
            raise ValueError("shock correlation must lie in (-1, 1)")

    @property
    def degenerate(self) -> bool:
        return self.scale == 0

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            return (x >= 0).astype(float)
        if self.kind == "logistic":
            return special.expit(x / self.scale)
        return special.ndtr(x / self.scale)

    def pdf(self, x):
        x = np.asarray(x, dtype=float) / self.scale
        if self.kind == "logistic":
            return special.expit(x) * special.expit(-x) / self.scale
        return np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi) / self.scale

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.degenerate:
            return np.zeros_like(u)
        if self.kind == "logistic":
            return self.scale * special.logit(u)
        return self.scale * special.ndtri(u)

    def partial_mean(self, x):
        """``E[eps * 1{eps <= x}]``."""
        x = np.asarray(x, dtype=float)
        s = self.scale
        if self.kind == "logistic":
            a = np.abs(x)
            return -a * special.expit(-a / s) - s * np.logaddexp(0.0, -a / s)
        return -s * np.exp(-0.5 * (x / s) ** 2) / np.sqrt(2 * np.pi)

    def positive_part(self, x):
        """``E[max(x - eps, 0)]``."""
        x = np.asarray(x, dtype=float)
        s = self.scale
        if self.kind == "logistic":
            return s * np.logaddexp(0.0, x / s)
        return x * special.ndtr(x / s) + s * np.exp(-0.5 * (x / s) ** 2) / np.sqrt(
            2 * np.pi
        )

    def sample(self, rng: np.random.Generator, size) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``(eps_i, eps_j)`` arrays of the given shape."""
        g = rng.standard_normal((2,) + tuple(np.atleast_1d(size)))
        gj = self.corr * g[0] + np.sqrt(1 - self.corr**2) * g[1]
        if self.degenerate:
            return np.zeros_like(g[0]), np.zeros_like(gj)
        if self.kind == "normal":
            return self.scale * g[0], self.scale * gj
        return self.from_gaussian(g[0]), self.from_gaussian(gj)

    def from_gaussian(self, g):
        """Map standard-normal copula draws onto this distribution."""
        g = np.asarray(g, dtype=float)
        if self.degenerate:
            return np.zeros_like(g)
        if self.kind == "normal":
            return self.scale * g
        # logit(ndtr(g)) without rounding ndtr to 0 or 1 in the tails
        return self.scale * (special.log_ndtr(g) - special.log_ndtr(-g))


@dataclass(frozen=True)
class HouseholdParams:
    """Primitives of the static model.

    ``Td_i``/``Td_j`` default to the full time endowments, so work and care are
    mutually exclusive.  ``medical_cost`` is the out-of-pocket cost under poor
    parental health; it is zero under good health.  ``wealth`` is non-labor
    resources added to the budget.
    """

    gamma: float = 1.0
    phi_i: float = 1.0
    phi_j: float = 0.7
    T_i: float = 1.0
    T_j: float = 1.0
    Td_i: float | None = None
    Td_j: float | None = None
    medical_cost: float = 0.0
    care_utility: CareUtility = field(default_factory=CareUtility)
    curvature: float = 1.0
    wealth: float = 0.0
    shocks: ShockDistribution = field(default_factory=ShockDistribution)

    def __post_init__(self):
        if self.Td_i is None:
            object.__setattr__(self, "Td_i", self.T_i)
        if self.Td_j is None:
            object.__setattr__(self, "Td_j", self.T_j)
        for name in ("phi_i", "phi_j", "T_i", "T_j", "Td_i", "Td_j"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")
        if not self.medical_cost >= 0:
            raise ValueError("medical_cost must be non-negative")
        if not self.curvature > 0:
            raise ValueError("consumption curvature must be positive")
        worst = self.medical_cost + max(self.phi_i * self.Td_i, self.phi_j * self.Td_j)
        if not self.full_income + self.wealth > worst:
            raise InfeasibleChoiceError(
                "full income plus wealth must exceed M(1) plus the larger "
                f"single-earner care cost ({self.full_income + self.wealth} <= {worst})"
            )

    @property
    def full_income(self) -> float:
        return self.phi_i * self.T_i + self.phi_j * self.T_j

    def M(self, z) -> float:
        return self.medical_cost if z else 0.0

    def swapped(self) -> "HouseholdParams":
        """Same household with spouse labels exchanged."""
        return replace(
            self,
            phi_i=self.phi_j,
            phi_j=self.phi_i,
            T_i=self.T_j,
            T_j=self.T_i,
            Td_i=self.Td_j,
            Td_j=self.Td_i,
        )


@dataclass(frozen=True)
class ShockDraw:
    eps_i: float = 0.0
    eps_j: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.eps_i) and np.isfinite(self.eps_j)):
            raise ValueError("shock draws must be finite")


@dataclass(frozen=True)
class ChoiceOutcome:
    w_i: int
    w_j: int
    d_i: int
    d_j: int
    d: int
    c: float
    utility: float
    feasible: bool


def consumption_utility(c, curvature: float = 1.0):
    """CRRA utility ``(c**(1-theta) - 1) / (1-theta)``; ``theta = 1`` is log."""
    c = np.asarray(c, dtype=float)
    if np.any(~(c > 0)):
        raise InfeasibleChoiceError("consumption must be strictly positive")
    if curvature == 1.0:
        out = np.log(c)
    else:
        out = np.expm1((1.0 - curvature) * np.log(c)) / (1.0 - curvature)
    return out if out.ndim else float(out)


def budget_residual(params: HouseholdParams, z: int, w_i: int, w_j: int) -> float:
    d_i, d_j = 1 - w_i, 1 - w_j
    return (
        params.full_income
        + params.wealth
        - params.M(z)
        - params.phi_i * params.Td_i * d_i
        - params.phi_j * params.Td_j * d_j
    )


def household_utility(
    params: HouseholdParams,
    z: int,
    choice: Sequence[int],
    shocks: ShockDraw = ShockDraw(),
) -> ChoiceOutcome:
    """Evaluate one ``(w_i, w_j)`` alternative.

    Infeasible alternatives come back with ``feasible=False`` and utility
    ``-inf`` instead of raising.
    """
    w_i, w_j = int(choice[0]), int(choice[1])
    if w_i not in (0, 1) or w_j not in (0, 1) or z not in (0, 1):
        raise ValueError("z, w_i and w_j must be 0 or 1")
    d_i, d_j = 1 - w_i, 1 - w_j
    d = 1 - (d_i == 0) * (d_j == 0)
    c = budget_residual(params, z, w_i, w_j)
    if c <= 0:
        return ChoiceOutcome(w_i, w_j, d_i, d_j, d, c, -np.inf, False)
    utility = (
        consumption_utility(c, params.curvature)
        + params.gamma * params.care_utility(z, d)
        - shocks.eps_i * w_i
        - shocks.eps_j * w_j
    )
    return ChoiceOutcome(w_i, w_j, d_i, d_j, d, c, float(utility), True)


def optimal_choice(
    params: HouseholdParams, z: int, shocks: ShockDraw = ShockDraw()
) -> ChoiceOutcome:
    """Utility-maximizing alternative; ties go to more work (``w_i`` first)."""
    best = None
    for alt in ALTERNATIVES:
        out = household_utility(params, z, alt, shocks)
        if out.feasible and (best is None or out.utility > best.utility):
            best = out
    if best is None:
        raise InfeasibleChoiceError(
            f"no feasible alternative at z={z}: income {params.full_income + params.wealth}"
            f" cannot cover medical cost {params.M(z)}"
        )
    return best


def return_to_work(
    params: HouseholdParams, z: int, spouse: str = "j", spouse_works: bool = True
) -> float:
    """Utility gain from work net of the disutility shock, other spouse held fixed.

    With the other spouse working this is the consumption gain minus the
    altruism loss.  When the other spouse already cares, the altruism term
    drops out because the parents are cared for either way.
    """
    if spouse not in ("i", "j"):
        raise ValueError("spouse must be 'i' or 'j'")
    other = int(bool(spouse_works))
    work = (1, other) if spouse == "i" else (other, 1)
    care = (0, other) if spouse == "i" else (other, 0)
    hi = household_utility(params, z, work)
    lo = household_utility(params, z, care)
    if not (hi.feasible and lo.feasible):
        raise InfeasibleChoiceError(
            f"return to work for spouse {spouse} at z={z} needs both alternatives "
            f"feasible (consumption {hi.c:.6g} / {lo.c:.6g})"
        )
    return hi.utility - lo.utility


def work_probability(
    params: HouseholdParams, z: int, spouse: str = "j", spouse_works: bool = True
) -> float:
    """``P(eps <= S(z))`` under the configured shock distribution."""
    s = return_to_work(params, z, spouse, spouse_works)
    return float(params.shocks.cdf(s))


@dataclass(frozen=True)
class WorkerTypePartition:
    """Partition of the disutility axis at the two returns to work.

    A spouse with disutility ``eps`` works under health ``z`` iff
    ``eps <= S(z)``.
    """

    s0: float
    s1: float

    def label(self, eps) -> WorkerType | np.ndarray:
        eps_arr = np.asarray(eps, dtype=float)
        lo, hi = min(self.s0, self.s1), max(self.s0, self.s1)
        middle = WorkerType.COMPLIER if self.s1 <= self.s0 else WorkerType.DEFIER
        choices = np.array([WorkerType.ALWAYS_WORKER, middle, WorkerType.ALWAYS_CAREGIVER],
                           dtype=object)
        idx = (eps_arr > lo).astype(int) + (eps_arr > hi).astype(int)
        return choices[int(idx)] if idx.ndim == 0 else choices[idx]

    def intervals(self) -> list[tuple[float, float, WorkerType]]:
        lo, hi = min(self.s0, self.s1), max(self.s0, self.s1)
        middle = WorkerType.COMPLIER if self.s1 <= self.s0 else WorkerType.DEFIER
        return [
            (-np.inf, lo, WorkerType.ALWAYS_WORKER),
            (lo, hi, middle),
            (hi, np.inf, WorkerType.ALWAYS_CAREGIVER),
        ]


def classify_types(
    params: HouseholdParams, spouse: str = "j", spouse_works: bool = True
) -> WorkerTypePartition:
    return WorkerTypePartition(
        s0=return_to_work(params, 0, spouse, spouse_works),
        s1=return_to_work(params, 1, spouse, spouse_works),
    )


@dataclass(frozen=True)
class SweepRanges:
    """Maps the unit-interval sweep axes onto model quantities."""

    wealth: tuple[float, float] = (0.0, 1.0)
    wage: tuple[float, float] = (0.3, 1.5)


@dataclass(frozen=True)
class SweepResult:
    wealth: np.ndarray
    wage: np.ndarray
    delta: np.ndarray  # (len(wealth), len(wage)); nan where infeasible
    feasible: np.ndarray

    def rows(self):
        for a, wa in enumerate(self.wealth):
            for b, wg in enumerate(self.wage):
                yield float(wa), float(wg), float(self.delta[a, b]), bool(self.feasible[a, b])


def income_effect_params() -> HouseholdParams:
    """Default calibration in which medical costs can raise the wife's work incentive."""
    return HouseholdParams(
        gamma=1.0,
        phi_i=1.0,
        phi_j=0.7,
        T_i=1.0,
        T_j=1.0,
        medical_cost=0.28,
        care_utility=CareUtility(u00=0.0, u01=0.1, u10=-1.0, u11=-0.7),
        curvature=5.0,
    )


def gradient_sweep(
    base_params: HouseholdParams,
    wealth_grid: Sequence[float] = tuple(np.linspace(0, 1, 11)),
    wage_grid: Sequence[float] = tuple(np.linspace(0, 1, 11)),
    ranges: SweepRanges = SweepRanges(),
) -> SweepResult:
    """Change in the wife's work probability when parental health turns poor.

    Cell ``(a, b)`` holds ``P(work | z=1) - P(work | z=0)`` with the husband
    working, at normalized wealth ``wealth_grid[a]`` and wage ``wage_grid[b]``.
    """
    wealth = np.asarray(wealth_grid, dtype=float)
    wage = np.asarray(wage_grid, dtype=float)
    for name, g in (("wealth", wealth), ("wage", wage)):
        if g.ndim != 1 or np.any((g < 0) | (g > 1)):
            raise ValueError(f"{name} grid must be a 1-d array in [0, 1]")
    delta = np.full((wealth.size, wage.size), np.nan)
    feasible = np.zeros_like(delta, dtype=bool)
    w_lo, w_hi = ranges.wealth
    p_lo, p_hi = ranges.wage
    for a, x in enumerate(wealth):
        for b, y in enumerate(wage):
            try:
                p = replace(
                    base_params,
                    wealth=w_lo + x * (w_hi - w_lo),
                    phi_j=p_lo + y * (p_hi - p_lo),
                )
                delta[a, b] = work_probability(p, 1) - work_probability(p, 0)
                feasible[a, b] = True
            except InfeasibleChoiceError:
                pass
    return SweepResult(wealth, wage, delta, feasible)


def expected_maximum(values, shocks: ShockDistribution):
    """Expected maximum over the four alternatives and their choice probabilities.

    ``values`` has trailing axis 4 in ``ALTERNATIVES`` order and holds the
    deterministic part of each alternative (``-inf`` for infeasible ones).
    The realized payoff is ``values[a] - eps_i*w_i - eps_j*w_j``.

    Independent shocks are integrated in closed form over ``eps_j`` and over
    the outer pieces of ``eps_i``; the bounded middle piece uses chunked
    Gauss-Legendre.  Correlated shocks are integrated in copula space by
    Gauss-Legendre on pieces split at the kinks of the maximum.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != 4:
        raise ValueError("values must have a trailing axis of length 4")
    finite = np.isfinite(v)
    if np.any(np.isnan(v)) or np.any(v == np.inf):
        raise ValueError("alternative values must be finite or -inf")
    if not np.all(finite.any(axis=-1)):
        raise InfeasibleChoiceError("every alternative is infeasible at some state")

    if shocks.degenerate:
        idx = np.argmax(v, axis=-1)  # first maximum = tie-break order
        probs = np.zeros_like(v)
        np.put_along_axis(probs, idx[..., None], 1.0, axis=-1)
        return np.max(v, axis=-1), probs

    # Infeasible alternatives become finite but unreachable.
    vmin = np.min(np.where(finite, v, np.inf), axis=-1, keepdims=True)
    v = np.where(finite, v, vmin - 1e3 * shocks.scale - 1e3)

    if shocks.corr != 0.0:
        return _expected_maximum_quadrature(v, shocks)
    return _expected_maximum_independent(v, shocks)


def _expected_maximum_independent(v, shocks: ShockDistribution):
    F, s = shocks.cdf, shocks.scale
    v11, v10, v01, v00 = (v[..., k] for k in range(4))
    k0 = v10 - v00  # husband works iff eps_i <= k0 when the wife cares
    k1 = v11 - v01  # husband works iff eps_i <= k1 when the wife works
    lo = np.minimum(k0, k1)
    hi = np.maximum(k0, k1)
    F_lo, F_hi = F(lo), F(hi)
    G = shocks.partial_mean

    # Left piece: both conditional maxima have the husband working.
    pi_left = F((v11 - v10))  # P(wife works | eps_i) on the left piece
    left = (v10 + shocks.positive_part(v11 - v10)) * F_lo - G(lo)
    # Right piece: husband cares in both branches.
    pi_right = F((v01 - v00))
    right = (v00 + shocks.positive_part(v01 - v00)) * (1.0 - F_hi)

    # Middle piece on [lo, hi], clipped to the effective support.
    a = np.clip(lo, -_SUPPORT * s, _SUPPORT * s)
    b = np.clip(hi, -_SUPPORT * s, _SUPPORT * s)
    # Chunks no wider than one scale unit keep the rule at machine precision.
    n_chunks = int(min(_MAX_CHUNKS, max(1, np.ceil(np.max(b - a, initial=0.0) / s))))
    width = (b - a) / n_chunks
    offsets = (np.arange(n_chunks)[:, None] + 0.5 * (_GL_NODES[None, :] + 1.0)).ravel()
    wts = np.tile(_GL_WEIGHTS * 0.5, n_chunks)
    e = a[..., None] + width[..., None] * offsets
    dens = shocks.pdf(e) * width[..., None] * wts

    case1 = (k0 <= k1)[..., None]
    # k0 <= k1: wife-care branch has husband caring (A = v00),
    #           wife-work branch has husband working (B = v11 - e).
    # k1 <  k0: A = v10 - e, B = v01.
    A = np.where(case1, v00[..., None], v10[..., None] - e)
    B = np.where(case1, v11[..., None] - e, v01[..., None])
    mid_emax = np.sum((A + shocks.positive_part(B - A)) * dens, axis=-1)
    mid_pi = np.sum(F(B - A) * dens, axis=-1)
    mid_mass = F_hi - F_lo

    emax = left + mid_emax + right

    c1 = case1[..., 0]
    p11 = pi_left * F_lo + np.where(c1, mid_pi, 0.0)
    p01 = pi_right * (1.0 - F_hi) + np.where(c1, 0.0, mid_pi)
    p10 = (1.0 - pi_left) * F_lo + np.where(c1, 0.0, mid_mass - mid_pi)
    p00 = (1.0 - pi_right) * (1.0 - F_hi) + np.where(c1, mid_mass - mid_pi, 0.0)
    probs = np.stack([p11, p10, p01, p00], axis=-1)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum(axis=-1, keepdims=True)
    return emax, probs


def _to_gaussian(shocks: ShockDistribution, e):
    """Inverse of ``from_gaussian``, clipped to the truncation box."""
    z = special.ndtri(np.clip(shocks.cdf(e), 1e-300, 1.0))
    return np.clip(z, -_GAUSS_BOX, _GAUSS_BOX)


def _pieces(lo, hi, nodes, weights):
    """Legendre nodes mapped onto ``[lo, hi]`` along a new trailing axis."""
    half = 0.5 * (hi - lo)[..., None]
    return 0.5 * (hi + lo)[..., None] + half * nodes, half * weights


def _expected_maximum_quadrature(v, shocks: ShockDistribution):
    rho = shocks.corr
    sig = np.sqrt(1.0 - rho**2)
    flat = v.reshape(-1, 4)

    def rule(order, block):
        x, w = np.polynomial.legendre.leggauss(order)
        v11, v10, v01, v00 = (block[:, k] for k in range(4))
        # Outer pieces in g_i split where the husband's choice flips.
        g0 = _to_gaussian(shocks, v10 - v00)
        g1 = _to_gaussian(shocks, v11 - v01)
        cuts = [np.full_like(g0, -_GAUSS_BOX), np.minimum(g0, g1), np.maximum(g0, g1),
                np.full_like(g0, _GAUSS_BOX)]
        g, wg = zip(*(_pieces(a, b, x, w) for a, b in zip(cuts[:-1], cuts[1:])))
        g, wg = np.concatenate(g, axis=-1), np.concatenate(wg, axis=-1)
        wg = wg * np.exp(-0.5 * g * g) / np.sqrt(2 * np.pi)
        e_i = shocks.from_gaussian(g)
        A = np.maximum(v10[:, None] - e_i, v00[:, None])  # wife cares
        B = np.maximum(v11[:, None] - e_i, v01[:, None])  # wife works, before her shock
        # Inner pieces in the independent part h split where the wife's choice flips.
        hstar = np.clip((_to_gaussian(shocks, B - A) - rho * g) / sig, -_GAUSS_BOX, _GAUSS_BOX)
        lo_h, hi_h = np.full_like(hstar, -_GAUSS_BOX), np.full_like(hstar, _GAUSS_BOX)
        h1, w1 = _pieces(lo_h, hstar, x, w)
        h2, w2 = _pieces(hstar, hi_h, x, w)
        h, wh = np.concatenate([h1, h2], axis=-1), np.concatenate([w1, w2], axis=-1)
        wh = wh * np.exp(-0.5 * h * h) / np.sqrt(2 * np.pi)
        e_j = shocks.from_gaussian(rho * g[..., None] + sig * h)
        wt = wg[..., None] * wh
        payoff = np.stack(
            [
                v11[:, None, None] - e_i[..., None] - e_j,
                np.broadcast_to((v10[:, None] - e_i)[..., None], e_j.shape),
                v01[:, None, None] - e_j,
                np.broadcast_to(v00[:, None, None], e_j.shape),
            ],
            axis=-1,
        )
        best = np.argmax(payoff, axis=-1)
        emax = np.sum(np.max(payoff, axis=-1) * wt, axis=(1, 2))
        probs = np.stack([np.sum((best == k) * wt, axis=(1, 2)) for k in range(4)], axis=-1)
        return emax, probs / probs.sum(axis=-1, keepdims=True)

    n = shocks.quadrature_order
    emax = np.empty(flat.shape[0])
    probs = np.empty_like(flat)
    resid = 0.0
    # Blocks bound the (states x nodes x nodes) working arrays.
    step = max(1, 200_000 // (6 * n * n))
    for s0 in range(0, flat.shape[0], step):
        blk = flat[s0 : s0 + step]
        e, p = rule(n, blk)
        coarse, _ = rule(max(2 * n // 3, 2), blk)
        resid = max(resid, float(np.max(np.abs(e - coarse) / (1.0 + np.abs(e)))))
        emax[s0 : s0 + step], probs[s0 : s0 + step] = e, p
    if resid > shocks.quadrature_tol:
        raise QuadratureError(
            f"shock quadrature did not converge: relative residual {resid:.3g} "
            f"between orders {n} and {max(2 * n // 3, 2)}"
        )
    return emax.reshape(v.shape[:-1]), probs.reshape(v.shape)


__all__ = [
    "ALTERNATIVES",
    "ALTERNATIVE_LABELS",
    "CareUtility",
    "ChoiceOutcome",
    "HouseholdParams",
    "InfeasibleChoiceError",
    "QuadratureError",
    "ShockDistribution",
    "ShockDraw",
    "SweepRanges",
    "SweepResult",
    "WorkerType",
    "WorkerTypePartition",
    "budget_residual",
    "classify_types",
    "consumption_utility",
    "expected_maximum",
    "gradient_sweep",
    "household_utility",
    "income_effect_params",
    "optimal_choice",
    "return_to_work",
    "work_probability",
]
