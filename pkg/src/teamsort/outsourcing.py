"""Binary economies where a cross-skill team may split into two firms at cost c.

Splitting removes the wage comparison between the two co-workers. The module
solves the resulting equilibrium, decomposes wage variance into within- and
between-firm parts and tracks both along skill-biased technology shifts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dist import BinarySkill, Uniform, Affine, LogNormal, Marginal
from .economy import Binary, SBTCShift, apply_sbtc, blend
from .errors import InputError
from .sorting import BinarySorting, _as_pop, binary_cutoff
from .wages import binary_corner_gap

RATIO_THRESHOLD = 4.0 * math.sqrt(3.0) / 9.0


@dataclass(frozen=True)
class OutsourcingScenario:
    f: Binary
    traits: BinarySkill
    c: float
    alpha_l: float = 0.5

    def __post_init__(self):
        if not isinstance(self.f, Binary):
            raise InputError("outsourcing needs binary production")
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise InputError(f"outsourcing cost must be finite and >= 0, got {self.c}")
        if not 0.0 <= self.alpha_l <= 1.0:
            raise InputError(f"alpha_l must lie in [0, 1], got {self.alpha_l}")

    @property
    def alpha_h(self) -> float:
        return 1.0 - self.alpha_l

    def with_production(self, f: Binary) -> "OutsourcingScenario":
        return OutsourcingScenario(f, self.traits, self.c, self.alpha_l)


@dataclass(frozen=True)
class OutsourcingEquilibrium:
    """Type-level equilibrium.

    In the "mixed" regime every team is high-low and wages are constant
    within (skill, firm form). In the "no-outsourcing" regime the baseline
    binary sorting applies and w_n_* hold its cross-match wages.
    """

    scenario: OutsourcingScenario
    regime: str
    y_o: float
    w_o_h: float
    w_o_l: float
    w_n_h: float
    w_n_l: float
    T_h: float
    T_l: float
    target: float | None = None
    baseline: BinarySorting | None = field(default=None, repr=False)

    @property
    def delta_w_n(self) -> float:
        return self.w_n_h - self.w_n_l

    @property
    def delta_w_o(self) -> float:
        return self.w_o_h - self.w_o_l

    @property
    def corner(self) -> str | None:
        if self.regime != "mixed":
            return None
        if self.y_o <= 0.0:
            return "none-outsourced"
        if self.y_o >= 1.0:
            return "all-outsourced"
        return None

    def c_identity_error(self) -> float:
        """|c - dw_n (T_l - T_h)|; zero at interior y_o."""
        return abs(self.scenario.c - self.delta_w_n * (self.T_l - self.T_h))

    def budget_errors(self) -> tuple[float, float]:
        """Budget gaps for two-firm and joint teams. Joint wages are off path when y_o = 1."""
        f, c = self.scenario.f, self.scenario.c
        return (abs(self.w_o_h + self.w_o_l - (f.F_hl - c)),
                abs(self.w_n_h + self.w_n_l - f.F_hl))

    def outsources(self, X) -> np.ndarray:
        """True for workers in a two-firm team."""
        X = _as_pop(X)
        if self.regime != "mixed":
            return np.zeros(len(X), dtype=bool)
        high = self.scenario.f.is_high(X[:, 0])
        return np.where(high, X[:, 1] < self.T_h - 0.5, X[:, 1] > self.T_l - 0.5)

    def u_o(self, X) -> np.ndarray:
        X = _as_pop(X)
        high = self.scenario.f.is_high(X[:, 0])
        return np.where(high, self.w_o_h, self.w_o_l)

    def u_n(self, X) -> np.ndarray:
        X = _as_pop(X)
        f = self.scenario.f
        high = f.is_high(X[:, 0])
        w = np.where(high, self.w_n_h, self.w_n_l)
        return 0.5 * f.F_hl + (2 * w - f.F_hl) * (0.5 + X[:, 1])

    def wage(self, X) -> np.ndarray:
        X = _as_pop(X)
        high = self.scenario.f.is_high(X[:, 0])
        if self.regime != "mixed":
            return _baseline_wage(self, X)
        return np.where(self.outsources(X), np.where(high, self.w_o_h, self.w_o_l),
                        np.where(high, self.w_n_h, self.w_n_l))

    def payoff(self, X) -> np.ndarray:
        X = _as_pop(X)
        if self.regime != "mixed":
            f = self.scenario.f
            w = _baseline_wage(self, X)
            cross = self.baseline.crosses(X)
            return np.where(cross, 0.5 * f.F_hl + (2 * w - f.F_hl) * (0.5 + X[:, 1]), w)
        return np.where(self.outsources(X), self.u_o(X), self.u_n(X))


def _baseline_wage(eq: OutsourcingEquilibrium, X) -> np.ndarray:
    f = eq.scenario.f
    high = f.is_high(X[:, 0])
    cross = eq.baseline.crosses(X)
    return np.where(cross, np.where(high, eq.w_n_h, eq.w_n_l),
                    0.5 * np.where(high, f.F_hh, f.F_ll))


def _baseline_cross_wages(f: Binary, traits: BinarySkill, sol: BinarySorting,
                          alpha_l: float) -> tuple[float, float]:
    if sol.ybar <= 0.0:
        D = binary_corner_gap(f, traits, alpha_l)
        return 0.5 * (f.F_hl + D), 0.5 * (f.F_hl - D)
    Th, Tl = sol.T_own
    w_h = 0.5 * (f.F_hh + (f.F_hl - f.F_hh) * (1 - 1 / (2 * Th)))
    return w_h, f.F_hl - w_h


def outsourcing_target(scn: OutsourcingScenario) -> float:
    """Unclamped right-hand side of the cutoff equation T_h(y)/T_l(y) = target."""
    f = scn.f
    return 1.0 - 2.0 * scn.c / (f.F_hl - f.F_ll + 2.0 * scn.alpha_l * (scn.c - f.s_F))


def solve_outsourcing(scn: OutsourcingScenario) -> OutsourcingEquilibrium:
    f, tr = scn.f, scn.traits
    if scn.c > f.s_F:
        sol = BinarySorting(f, tr)
        w_h, w_l = _baseline_cross_wages(f, tr, sol, scn.alpha_l)
        Th, Tl = sol.T_own
        return OutsourcingEquilibrium(scn, "no-outsourcing", 0.0, math.nan, math.nan,
                                      w_h, w_l, Th, Tl, None, sol)
    target = outsourcing_target(scn)
    # same clamped bisection as the baseline cutoff
    y = binary_cutoff(target, tr)
    Th, Tl = float(tr.T_h(y)), float(tr.T_l(y))
    gain = f.s_F - scn.c
    w_o_h = 0.5 * f.F_hh + scn.alpha_h * gain
    w_o_l = 0.5 * f.F_ll + scn.alpha_l * gain
    # joint-firm wage that leaves the marginal worker indifferent
    w_n_h = 0.5 * f.F_hl + (2 * w_o_h - f.F_hl) / (4 * Th)
    w_n_l = 0.5 * f.F_hl + (2 * w_o_l - f.F_hl) / (4 * Tl)
    if y <= 0.0:
        # nobody outsources: the floors are slack, split the rest by bargaining weight
        slack = f.F_hl - w_n_h - w_n_l
        w_n_l += scn.alpha_l * slack
        w_n_h = f.F_hl - w_n_l
    return OutsourcingEquilibrium(scn, "mixed", y, w_o_h, w_o_l, w_n_h, w_n_l, Th, Tl, target)


# --------------------------------------------------------------------------
# inequality


@dataclass(frozen=True)
class InequalityDecomposition:
    y: float
    wfwi: float
    bfwi: float
    var_w: float
    direct_var: float
    regime: str

    @property
    def ratio(self) -> float:
        """BFWI / WFWI."""
        return self.bfwi / self.wfwi if self.wfwi > 0 else math.inf

    @property
    def bfwi_share(self) -> float:
        return self.bfwi / self.var_w if self.var_w > 0 else math.nan


def wage_atoms(eq: OutsourcingEquilibrium) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(wage, firm mean wage, population weight) for every wage atom."""
    f = eq.scenario.f
    if eq.regime == "mixed":
        y = eq.y_o
        mid = 0.5 * (eq.w_n_h + eq.w_n_l)
        w = np.array([eq.w_o_h, eq.w_o_l, eq.w_n_h, eq.w_n_l])
        m = np.array([eq.w_o_h, eq.w_o_l, mid, mid])
        p = np.array([y, y, 1 - y, 1 - y]) / 2
        return w, m, p
    y = eq.baseline.ybar
    mid = 0.5 * (eq.w_n_h + eq.w_n_l)
    w = np.array([0.5 * f.F_hh, 0.5 * f.F_ll, eq.w_n_h, eq.w_n_l])
    m = np.array([0.5 * f.F_hh, 0.5 * f.F_ll, mid, mid])
    p = np.array([y, y, 1 - y, 1 - y]) / 2
    return w, m, p


def direct_variance(eq: OutsourcingEquilibrium) -> tuple[float, float, float]:
    """(within, between, total) from the wage atoms by the law of total variance."""
    w, m, p = wage_atoms(eq)
    keep = p > 0
    w, m, p = w[keep], m[keep], p[keep]
    mean = math.fsum(p * w)
    within = math.fsum(p * (w - m) ** 2)
    between = math.fsum(p * (m - mean) ** 2)
    total = math.fsum(p * (w - mean) ** 2)
    return within, between, total


def inequality_decomposition(eq: OutsourcingEquilibrium) -> InequalityDecomposition:
    within, between, total = direct_variance(eq)
    if eq.regime != "mixed":
        # no outsourcing: within-firm gaps sit in cross teams, self-matched
        # firms only contribute between-firm variance
        return InequalityDecomposition(0.0, within, between, within + between, total, eq.regime)
    y, c = eq.y_o, eq.scenario.c
    wfwi = 0.25 * (1 - y) * eq.delta_w_n ** 2
    bfwi = 0.25 * (y * (1 - y) * c ** 2 + y * eq.delta_w_o ** 2)
    return InequalityDecomposition(y, wfwi, bfwi, wfwi + bfwi, total, eq.regime)


def ratio_from_types(eq: OutsourcingEquilibrium) -> float:
    """BFWI / WFWI written through T_h, T_l at the cutoff (interior y_o only)."""
    y, Th, Tl = eq.y_o, eq.T_h, eq.T_l
    return y * (Tl - Th) ** 2 + y / (1 - y) * (Th + Tl) ** 2


# --------------------------------------------------------------------------
# SBTC sweeps

SWEEP_COLUMNS = ["theta", "regime", "y_o", "w_o_h", "w_o_l", "w_n_h", "w_n_l",
                 "wfwi", "bfwi", "var_w", "ratio"]


@dataclass
class SweepResult:
    rows: list[dict]
    diagnostics: dict

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)


def _nondecreasing(a, tol=1e-12) -> bool:
    a = np.asarray(a, dtype=float)
    a = a[np.isfinite(a)]
    return bool(np.all(np.diff(a) >= -tol * np.maximum(1.0, np.abs(a[1:]))))


def sweep_point(scn: OutsourcingScenario, f1: Binary, theta: float) -> dict:
    eq = solve_outsourcing(scn.with_production(blend(scn.f, f1, theta)))
    dec = inequality_decomposition(eq)
    return {"theta": float(theta), "regime": eq.corner or eq.regime, "y_o": dec.y,
            "w_o_h": eq.w_o_h, "w_o_l": eq.w_o_l, "w_n_h": eq.w_n_h, "w_n_l": eq.w_n_l,
            "wfwi": dec.wfwi, "bfwi": dec.bfwi, "var_w": dec.var_w, "ratio": dec.ratio,
            "bfwi_share": dec.bfwi_share, "c_identity": eq.c_identity_error()
            if eq.regime == "mixed" and 0 < eq.y_o < 1 else math.nan}


def sbtc_sweep(scn: OutsourcingScenario, shift: SBTCShift, steps: int = 21) -> SweepResult:
    """Equilibria along theta*F_shifted + (1-theta)*F on an even theta grid."""
    if steps < 2:
        raise InputError("a sweep needs at least 2 steps")
    if scn.c > scn.f.s_F:
        raise InputError("sweep starts outside the outsourcing regime (c > s_F)")
    f1 = apply_sbtc(scn.f, shift)
    rows = [sweep_point(scn, f1, t) for t in np.linspace(0.0, 1.0, steps)]
    regimes = [r["regime"] for r in rows]
    diag = {
        "var_w_nondecreasing": _nondecreasing([r["var_w"] for r in rows]),
        "y_o_nondecreasing": _nondecreasing([r["y_o"] for r in rows]),
        "bfwi_share_nondecreasing": _nondecreasing([r["bfwi_share"] for r in rows]),
        "regime_changes": sum(a != b for a, b in zip(regimes, regimes[1:])),
        "s_F_drift": abs(f1.s_F - scn.f.s_F),
    }
    return SweepResult(rows, diag)


@dataclass(frozen=True)
class ShareConditionCheck:
    passed: bool
    max_derivative: float
    boundary_blowup: bool
    threshold: float = RATIO_THRESHOLD


def check_share_condition(G_l: Marginal, grid=None) -> ShareConditionCheck:
    """Bound on d/dy ln G_l^{-1}(y) that makes SBTC raise BFWI / Var(W).

    The derivative is taken numerically on `grid` (default: 2001 points on
    [0, 1]). A zero quantile at y = 0 is a logarithmic blow-up at the
    boundary; it is flagged and fails the check. Nonpositive quantiles
    inside the grid make the condition inapplicable.
    """
    y = np.linspace(0.0, 1.0, 2001) if grid is None else np.asarray(grid, dtype=float)
    if y.ndim != 1 or y.size < 3 or np.any(np.diff(y) <= 0) or y[0] < 0 or y[-1] > 1:
        raise InputError("grid must be increasing in [0, 1] with >= 3 points")
    q = np.asarray(G_l.ppf(y), dtype=float)
    blowup = bool(y[0] == 0.0 and q[0] <= 0.0)
    if blowup:
        y, q = y[1:], q[1:]
    if np.any(q <= 0):
        raise InputError("G_l quantile is nonpositive inside the grid; condition inapplicable")
    d = np.gradient(np.log(q), y)
    top = float(d.max())
    return ShareConditionCheck(bool(not blowup and top <= RATIO_THRESHOLD), top, blowup)


# --------------------------------------------------------------------------
# random scenarios


def _random_marginal(rng: np.random.Generator, floor: float) -> Marginal:
    lo = floor + rng.uniform(0.0, 1.0)
    if rng.random() < 0.7:
        return Uniform(lo, lo + rng.uniform(0.2, 2.0))
    return Affine(LogNormal(0.0, rng.uniform(0.05, 0.5)), loc=lo, scale=rng.uniform(0.2, 1.0))


def random_outsourcing_scenario(rng: np.random.Generator, min_x2: float = 0.0,
                                max_tries: int = 1000) -> tuple[OutsourcingScenario, SBTCShift]:
    """Submodular binary scenario with an interior outsourcing cutoff, plus a shift."""
    for _ in range(max_tries):
        F_hl = rng.uniform(1.0, 3.0)
        F_hh = rng.uniform(F_hl * 1.05, 1.95 * F_hl)
        f = Binary(0.0, F_hl, F_hh)
        c = rng.uniform(0.05, 0.9) * f.s_F
        tr = BinarySkill(_random_marginal(rng, min_x2), _random_marginal(rng, min_x2))
        scn = OutsourcingScenario(f, tr, c, rng.uniform(0.0, 1.0))
        y = solve_outsourcing(scn).y_o
        if 0.02 < y < 0.98:
            return scn, SBTCShift.binary(0.0, rng.uniform(0.1, 1.5))
    raise InputError("could not draw an interior outsourcing scenario")


check_prop6_condition = check_share_condition
