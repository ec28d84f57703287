"""Population inequality and welfare statistics.

Monte Carlo estimates use a pooled sample: n/2 draws plus their equilibrium
partners. Because sorting preserves the trait distribution, the pooled
sample is again a sample from H, and pairs are known exactly, so the
within/between split of the wage variance holds to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .dist import (Affine, BinarySkill, GaussianCopula, LogNormal, LogNormalJoint, Marginal,
                   Uniform)
from .economy import Additive, Binary, Multiplicative, ProductionFunction
from .errors import InputError, NumericalError
from .sorting import SortingSolution, solve_sorting
from .wages import WageSchedule

SIGMA_SLACK = 3.0
ABS_FLOOR = 1e-9


@dataclass(frozen=True)
class PopulationReport:
    n: int
    var_w_star: float
    var_w_S: float
    var_w_B: float
    wwi: float
    bwi: float
    corr_skill: float
    self_match_frac: float
    welfare_gain_share: float
    se: dict = field(default_factory=dict)
    exact: dict | None = None

    def identity_error(self) -> float:
        return abs(self.wwi + self.bwi - self.var_w_star)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("n", "var_w_star", "var_w_S", "var_w_B", "wwi",
                                             "bwi", "corr_skill", "self_match_frac",
                                             "welfare_gain_share")}
        out.update({f"se_{k}": v for k, v in self.se.items()})
        if self.exact:
            out.update({f"exact_{k}": v for k, v in self.exact.items()})
        return out


def pooled_sample(sol: SortingSolution, n: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """(X, partner index): n/2 draws followed by their partners."""
    if int(n) != n or n < 2 or n % 2:
        raise InputError(f"pooled sample size must be even and >= 2, got {n}")
    half = int(n) // 2
    X = sol.traits.sample(half, seed)
    M = sol.partner(X)
    idx = np.concatenate([np.arange(half, 2 * half), np.arange(half)])
    return np.vstack([X, M]), idx


def _pair_se(values: np.ndarray, half: int) -> float:
    # pairs are independent; members of a pair are not
    g = values[:half] + values[half:]
    return float(np.std(g, ddof=1) / math.sqrt(half) / 2.0)


def _var_se(w: np.ndarray, half: int) -> tuple[float, float]:
    d = (w - w.mean()) ** 2
    return float(d.mean()), _pair_se(d, half)


def binary_exact(f: Binary, traits: BinarySkill, sol, schedule: WageSchedule,
                 alpha_l: float) -> dict:
    """Exact variances from the wage atoms of a binary economy."""
    y = sol.ybar
    probe = []
    for high, G in ((True, traits.G_h), (False, traits.G_l)):
        x1 = f.h if high else f.l
        # preference ranks that cross (self-match) for this skill
        r_cross = 0.5 * (1 + y) if high else 0.5 * (1 - y)
        r_self = 0.5 * y if high else 1 - 0.5 * y
        probe += [(x1, float(G.ppf(r_cross)), (1 - y) / 2), (x1, float(G.ppf(r_self)), y / 2)]
    P = np.array([[a, b] for a, b, _ in probe])
    p = np.array([q for *_, q in probe])
    w = schedule.wage(P)
    keep = p > 0

    def var(v, q):
        m = math.fsum(q * v)
        return math.fsum(q * (v - m) ** 2)

    wS = 0.5 * np.array([f.F_hh, f.F_ll])
    wB = np.asarray(schedule.benchmark(np.array([f.h, f.l])), dtype=float)
    return {"var_w_star": var(w[keep], p[keep]), "var_w_S": var(wS, np.array([0.5, 0.5])),
            "var_w_B": var(wB, np.array([0.5, 0.5]))}


def population_report(f: ProductionFunction, traits, sol: SortingSolution | None = None,
                      schedule: WageSchedule | None = None, n: int = 100_000, seed=0,
                      alpha_l: float = 0.5, tol: float = 1e-12) -> PopulationReport:
    sol = sol if sol is not None else solve_sorting(f, traits)
    schedule = schedule if schedule is not None else WageSchedule(f, traits, sol, alpha_l)
    X, idx = pooled_sample(sol, n, seed)
    half = len(X) // 2
    u, w = schedule.evaluate(X)
    w_mate = w[idx]
    wS = 0.5 * np.asarray(f(X[:, 0], X[:, 0]), dtype=float)
    wB = np.asarray(schedule.benchmark(X[:, 0]), dtype=float)

    var_star, se_star = _var_se(w, half)
    var_S, se_S = _var_se(wS, half)
    var_B, se_B = _var_se(wB, half)
    wwi = float(np.mean(0.25 * (w - w_mate) ** 2))
    # pair means (w + w')/2 share the overall mean, so this is 0.25 Var(w + w')
    bwi = float(np.mean((0.5 * (w + w_mate) - w.mean()) ** 2))
    c = (w - w.mean()) ** 2
    se_gap_S = _pair_se((wS - wS.mean()) ** 2 - c, half)
    se_gap_B = _pair_se((wB - wB.mean()) ** 2 - c, half)

    gain = (u >= wB - tol * np.maximum(1.0, np.abs(wB))).astype(float)
    share = float(gain.mean())
    x1, m1 = X[:, 0], X[idx, 0]
    corr = float(np.corrcoef(x1, m1)[0, 1]) if np.std(x1) > 0 and np.std(m1) > 0 else math.nan
    selfm = float(np.mean(sol.is_selfmatch(X)))
    exact = None
    if isinstance(f, Binary):
        exact = binary_exact(f, traits, sol, schedule, alpha_l)
    se = {"var_w_star": se_star, "var_w_S": se_S, "var_w_B": se_B, "gap_S": se_gap_S,
          "gap_B": se_gap_B, "welfare_gain_share": _pair_se(gain, half)}
    return PopulationReport(len(X), var_star, var_S, var_B, wwi, bwi, corr, selfm, share, se, exact)


# --------------------------------------------------------------------------
# variance ordering across random scenarios


def scenario_seeds(seed, count: int) -> list[np.random.SeedSequence]:
    """Per-scenario seeds: children of SeedSequence(seed), in order."""
    return np.random.SeedSequence(seed).spawn(count)


def _nonneg_marginal(rng, floor=0.0) -> Marginal:
    lo = floor + rng.uniform(0.0, 0.8)
    if rng.random() < 0.6:
        return Uniform(lo, lo + rng.uniform(0.2, 2.0))
    return Affine(LogNormal(0.0, rng.uniform(0.05, 0.6)), loc=lo, scale=rng.uniform(0.2, 1.5))


def random_binary_economy(rng, min_x2: float = 0.0):
    F_hl = rng.uniform(1.0, 3.0)
    F_hh = rng.uniform(1.05 * F_hl, 3.0 * F_hl)
    f = Binary(0.0, F_hl, F_hh)
    return f, BinarySkill(_nonneg_marginal(rng, min_x2), _nonneg_marginal(rng, min_x2))


def random_additive_economy(rng, min_x2: float = 0.0):
    if rng.random() < 0.5:
        f = Additive.linear(rng.uniform(0.5, 3.0), rng.uniform(-1.0, 1.0))
        m1 = Uniform(0.0, rng.uniform(0.5, 3.0)) if rng.random() < 0.5 else \
            Affine(LogNormal(0.0, rng.uniform(0.05, 0.5)), 0.0, 1.0)
    else:
        f = Additive.power(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.5))
        m1 = Uniform(rng.uniform(0.1, 1.0), rng.uniform(1.2, 3.0))
    m2 = _nonneg_marginal(rng, min_x2)
    return f, GaussianCopula(m1, m2, float(rng.uniform(-0.9, 0.9)))


def random_multiplicative_economy(rng, max_negative_mass: float = 1e-3):
    """Log-normal traits with P(x2 < 0) = Phi(-delta2/sqrt(omega22)) kept small."""
    c = float(rng.choice([-1, 1]) * rng.uniform(0.2, 1.5))
    f = Multiplicative(rng.uniform(0.5, 2.0), c)
    om11, om22 = rng.uniform(0.02, 0.4, size=2)
    om12 = rng.uniform(-0.9, 0.9) * math.sqrt(om11 * om22)
    z = -special.ndtri(max_negative_mass)
    d2 = z * math.sqrt(om22) + rng.uniform(0.0, 1.0)
    return f, LogNormalJoint(rng.uniform(-0.5, 0.5), d2, om11, om12, om22)


FAMILIES = {
    "binary": random_binary_economy,
    "additive": random_additive_economy,
    "multiplicative": random_multiplicative_economy,
}


@dataclass
class SuiteReport:
    family: str
    rows: list[dict]

    @property
    def violations(self) -> list[dict]:
        return [r for r in self.rows if r["violation"]]

    @property
    def reversals(self) -> list[dict]:
        return [r for r in self.rows if r["reversal"]]

    @property
    def benchmark_order_violations(self) -> list[dict]:
        return [r for r in self.rows if r["benchmark_order_violation"]]


def _ordering_row(f, traits, alpha_l, n, seed) -> dict:
    rep = population_report(f, traits, n=n, seed=seed, alpha_l=alpha_l)
    if rep.exact is not None:
        vs, vS, vB = rep.exact["var_w_star"], rep.exact["var_w_S"], rep.exact["var_w_B"]
        sS = sB = 0.0
    else:
        vs, vS, vB = rep.var_w_star, rep.var_w_S, rep.var_w_B
        sS, sB = rep.se["gap_S"], rep.se["gap_B"]
    if not all(map(math.isfinite, (vs, vS, vB, sS, sB))):
        raise NumericalError(f"non-finite variance for {f!r}")
    slack_S = SIGMA_SLACK * sS + ABS_FLOOR
    slack_B = SIGMA_SLACK * sB + ABS_FLOOR
    return {"production": repr(f) if not isinstance(f, Additive) else f"Additive({f.label})",
            "traits": repr(traits), "alpha_l": alpha_l,
            "var_w_star": vs, "var_w_S": vS, "var_w_B": vB, "se_gap_S": sS, "se_gap_B": sB,
            "violation": vS - vs < -slack_S,
            "reversal": vs - vB > slack_B,
            "benchmark_order_violation": vB >= vS and vB - vs < -slack_B}


def variance_ordering_suite(family: str, n_scenarios: int = 100, seed=0, n: int = 100_000,
                            min_x2: float = 0.0) -> SuiteReport:
    """Check Var(w_S) >= Var(w*) on random scenarios from one class.

    Reversals Var(w*) > Var(w_B) are recorded, not treated as failures.
    """
    if family not in FAMILIES:
        raise InputError(f"unknown family {family!r}; expected one of {sorted(FAMILIES)}")
    rows = []
    for ss in scenario_seeds(seed, n_scenarios):
        rng = np.random.default_rng(ss)
        if family == "multiplicative":
            f, traits = FAMILIES[family](rng)
        else:
            f, traits = FAMILIES[family](rng, min_x2)
        alpha_l = float(rng.uniform(0.0, 1.0))
        rows.append(_ordering_row(f, traits, alpha_l, n, rng.integers(2**63)))
    return SuiteReport(family, rows)


def reversal_fixture():
    """Submodular binary economy with inequity-averse workers who all self-match.

    Low-skill workers hold all benchmark bargaining power, so benchmark
    wages are less unequal than self-match wages and relative concerns
    raise inequality.
    """
    from .dist import inequity_aversion_traits
    f = Binary(0.0, 2.0, 3.0)
    traits = inequity_aversion_traits(Uniform(1.0, 2.0), Uniform(0.0, 0.1))
    return f, traits, 1.0
