"""Equilibrium payoffs and wages, benchmark wages and the truth-telling check."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .dist import BinarySkill, LogNormalJoint
from .economy import Additive, Binary, Multiplicative, ProductionFunction
from .errors import InputError, UnsupportedCaseError
from .sorting import (AdditiveSorting, BinarySorting, MultiplicativeSorting, SortingSolution,
                      _as_pop, classify, solve_sorting)

QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=400)


def selfmatch_wage(f: ProductionFunction, x1):
    return 0.5 * np.asarray(f(x1, x1)) if np.ndim(x1) else 0.5 * f(x1, x1)


def wage_from_utility(u, x2, f_match_output):
    """Wage that delivers utility u to a worker with concern x2 in a team producing F."""
    t = 1.0 + 2.0 * np.asarray(x2, dtype=float)
    w = 0.5 * (2.0 * np.asarray(u) / t + (1.0 - 1.0 / t) * np.asarray(f_match_output))
    return float(w) if np.ndim(w) == 0 else w


# --------------------------------------------------------------------------
# general form: Stieltjes integral along x2 at fixed skill


def payoff_wage_general(f: ProductionFunction, traits, sol: SortingSolution, x1: float,
                        x2: float) -> tuple[float, float]:
    """(u*, w*) from the envelope integrals along the x2 path at fixed x1.

    Both are Stieltjes integrals against m(s) = F(x1, mu1(x1, s)); after
    integrating by parts only the integral of m(s)/(1+2s)^2 remains, which
    is evaluated in t = ln(1+2s) with breakpoints at jumps of m.
    """
    x1, x2 = float(x1), float(x2)
    if not x2 > -0.5:
        raise InputError("x2 must exceed -0.5")
    s0 = float(sol.selfmatch_x2(x1))
    if not np.isfinite(s0):
        raise UnsupportedCaseError(f"no self-matching worker with skill {x1}: payoffs not anchored")
    F_self = float(f(x1, x1))

    def m(s):
        return float(f(x1, sol.partner_skill(x1, s)[0]))

    t0, t1 = np.log1p(2 * s0), np.log1p(2 * x2)
    lo, hi = min(t0, t1), max(t0, t1)
    pts = [np.log1p(2 * b) for b in sol.breakpoints(x1)]
    pts = [p for p in pts if lo < p < hi]
    if hi > lo:
        I, _ = integrate.quad(lambda t: 0.5 * m(0.5 * np.expm1(t)) * np.exp(-t), lo, hi,
                              points=pts or None, **QUAD_OPTS)
        if t1 < t0:
            I = -I
    else:
        I = 0.0
    m_end = m(x2)
    g_w = lambda s: s / (1 + 2 * s)
    w = 0.5 * F_self + g_w(x2) * m_end - g_w(s0) * F_self - I
    g_u0 = (s0 - x2) / (1 + 2 * s0)
    u = 0.5 * F_self - g_u0 * F_self - (1 + 2 * x2) * I
    return u, w


# --------------------------------------------------------------------------
# additive closed form


def payoff_wage_additive(f: Additive, traits, x1: float, x2: float,
                         sol: AdditiveSorting | None = None) -> tuple[float, float]:
    """Closed-form additive (u*, w*) by direct quadrature of the L-integrals."""
    sol = sol if sol is not None else AdditiveSorting(f, traits)
    x1, x2 = float(x1), float(x2)
    mu1 = float(sol.partner(np.array([[x1, x2]]))[0, 0])
    K1 = float(f.K(np.asarray(x1)))

    def wage_integrand(s):
        L = float(sol.L(s))
        return float(f.dK(np.asarray(s))) * L / (1 + 2 * L)

    def pay_integrand(s):
        L = float(sol.L(s))
        return float(f.dK(np.asarray(s))) * (L - x2) / (1 + 2 * L)

    # a partner within a few ulps is a self-match up to rounding
    if abs(mu1 - x1) <= 4 * np.spacing(max(abs(x1), abs(mu1))):
        return K1, K1
    Iw, _ = integrate.quad(wage_integrand, x1, mu1, **QUAD_OPTS)
    Iu, _ = integrate.quad(pay_integrand, x1, mu1, **QUAD_OPTS)
    return K1 + Iu, K1 + Iw


class _AdditiveTable:
    """Antiderivative of K'(s) / (1 + 2 L(s)) tabulated on normal-score nodes."""

    def __init__(self, f: Additive, sol: AdditiveSorting, nodes: int = 1025, order: int = 16):
        self.f, self.sol = f, sol
        z = np.linspace(-8.5, 8.5, nodes)
        # ndtr rounds to 1.0 in the far tail; unbounded quantiles would be inf
        q = np.clip(special.ndtr(z), 0.0, np.nextafter(1.0, 0.0))
        self.s = np.asarray(sol.H1.ppf(q), dtype=float)
        gx, gw = np.polynomial.legendre.leggauss(order)
        self.gx, self.gw = gx, gw
        inc = self._gl(self.s[:-1], self.s[1:])
        self.cum = np.concatenate([[0.0], np.cumsum(inc)])

    def _integrand(self, s):
        L = np.asarray(self.sol.L(s), dtype=float)
        return np.asarray(self.f.dK(s), dtype=float) / (1.0 + 2.0 * L)

    def _gl(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        pts = (0.5 * (a + b))[:, None] + half[:, None] * self.gx[None, :]
        vals = self._integrand(pts.ravel()).reshape(pts.shape)
        return half * (vals @ self.gw)

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        k = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, self.s.size - 1)
        return self.cum[k] + self._gl(self.s[k], s)


# --------------------------------------------------------------------------
# multiplicative closed form


def _mult_pieces(sol: MultiplicativeSorting, x1, x2):
    f: Multiplicative = sol.f
    c, r, A = sol.c, sol.r, f.A
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    a = c / r
    B = np.exp(c * sol.k) * x1 ** (c + c * c / r)
    s0 = np.asarray(sol.selfmatch_x2(x1), dtype=float)
    t0, t1 = np.log1p(2 * s0), np.log1p(2 * x2)

    # m(t) = A - 1/c + (B/c) exp(-a t); antiderivative of m(t) exp(-t) / 2
    def anti(t):
        first = -(A - 1.0 / c) * 0.5 * np.exp(-t)
        if np.isclose(a, -1.0, rtol=0, atol=1e-14):
            second = B / (2 * c) * t
        else:
            second = -B / (2 * c * (a + 1)) * np.exp(-(a + 1) * t)
        return first + second

    I = anti(t1) - anti(t0)
    F_self = np.asarray(f(x1, x1))
    mu1 = np.exp((c * np.log(x1) - t1) / r + sol.k)
    m_end = np.asarray(f(x1, mu1))
    return F_self, m_end, s0, I


def payoff_wage_multiplicative(sol: MultiplicativeSorting, x1, x2):
    F_self, m_end, s0, I = _mult_pieces(sol, x1, x2)
    x2 = np.asarray(x2, dtype=float)
    w = 0.5 * F_self + x2 / (1 + 2 * x2) * m_end - s0 / (1 + 2 * s0) * F_self - I
    u = 0.5 * F_self - (s0 - x2) / (1 + 2 * s0) * F_self - (1 + 2 * x2) * I
    if np.ndim(u) == 0:
        return float(u), float(w)
    return u, w


# --------------------------------------------------------------------------
# binary closed form


def binary_corner_gap(f: Binary, traits: BinarySkill, alpha_l: float = 0.5,
                      cap: float | None = None) -> float:
    """Wage gap Delta = 2 w_h - F_hl when every team cross-matches.

    Competition only pins Delta to an interval; alpha_l picks a point in it,
    with alpha_l = 1 giving low-skill workers the most. `cap` optionally
    tightens the upper end.
    """
    lo = (f.F_hh - f.F_hl) / (2 * float(traits.T_h(0.0)))
    hi = (f.F_hl - f.F_ll) / (2 * float(traits.T_l(0.0)))
    if cap is not None:
        hi = min(hi, cap)
    if hi < lo - 1e-12:
        raise UnsupportedCaseError("empty bargaining interval at the no-self-matching corner")
    return lo + (1.0 - alpha_l) * (hi - lo)


def payoff_wage_binary(f: Binary, traits: BinarySkill, sol: BinarySorting, X,
                       alpha_l: float = 0.5):
    """(u*, w*) for binary skills; vectorized over an (n, 2) population."""
    X = _as_pop(X)
    high = f.is_high(X[:, 0])
    x2 = X[:, 1]
    F_self = np.where(high, f.F_hh, f.F_ll)
    if sol.ybar <= 0.0:
        D = binary_corner_gap(f, traits, alpha_l)
        sign = np.where(high, 1.0, -1.0)
        w = 0.5 * f.F_hl + 0.5 * sign * D
        u = 0.5 * f.F_hl + 0.5 * sign * D * (1 + 2 * x2)
        return u, w
    cross = sol.crosses(X)
    Th, Tl = sol.T_own
    T = np.where(high, Th, Tl)
    jump = f.F_hl - F_self
    w = np.where(cross, 0.5 * (F_self + jump * (1 - 1 / (2 * T))), 0.5 * F_self)
    u = np.where(cross, 0.5 * (F_self + jump * (1 - (1 + 2 * x2) / (2 * T))), 0.5 * F_self)
    return u, w


# --------------------------------------------------------------------------
# benchmark


def benchmark_wage(f: ProductionFunction, traits, x1, alpha_l: float = 0.5):
    """Wage when nobody has relative concerns (utility equals wage)."""
    if not 0.0 <= alpha_l <= 1.0:
        raise InputError("alpha_l must lie in [0, 1]")
    x1a = np.asarray(x1, dtype=float)
    if isinstance(f, Additive):
        out = 0.5 * np.asarray(f(x1a, x1a))
    elif isinstance(f, Binary):
        high = f.is_high(x1a)
        if f.s_F <= 0:
            out = np.where(high, 0.5 * f.F_hh, 0.5 * f.F_ll)
        else:
            alpha = np.where(high, 1.0 - alpha_l, alpha_l)
            out = 0.5 * (np.where(high, f.F_hh, f.F_ll) + alpha * 2 * f.s_F)
    elif isinstance(f, Multiplicative):
        if f.c > 0:
            out = 0.5 * np.asarray(f(x1a, x1a))
        elif isinstance(traits, LogNormalJoint):
            c, d1 = f.c, traits.delta1
            e = np.exp(2 * c * d1)
            out = (f.A * c + e - 1) / (2 * c) + e * (np.log(x1a) - d1)
        else:
            raise UnsupportedCaseError("submodular multiplicative benchmark needs log-normal skills")
    else:
        raise UnsupportedCaseError(f"no benchmark wage for production {f.kind!r}")
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# schedules


class WageSchedule:
    """Vectorized u* and w* for one solved economy."""

    def __init__(self, f, traits, sol: SortingSolution | None = None, alpha_l: float = 0.5):
        self.f, self.traits = f, traits
        self.sol = sol if sol is not None else solve_sorting(f, traits)
        self.kind = self.sol.kind
        self.alpha_l = alpha_l
        self._table = _AdditiveTable(f, self.sol) if self.kind == "additive" else None

    def evaluate(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = _as_pop(X)
        if self.kind == "binary":
            return payoff_wage_binary(self.f, self.traits, self.sol, X, self.alpha_l)
        if self.kind == "multiplicative":
            return payoff_wage_multiplicative(self.sol, X[:, 0], X[:, 1])
        # additive: w = K1 + (K(mu1) - K1)/2 - (Psi(mu1) - Psi(x1))/2
        mu1 = self.sol.partner(X)[:, 0]
        K1 = np.asarray(self.f.K(X[:, 0]), dtype=float)
        E = np.asarray(self.f.K(mu1), dtype=float) - K1
        D = self._table(mu1) - self._table(X[:, 0])
        w = K1 + 0.5 * E - 0.5 * D
        u = K1 + 0.5 * E - (0.5 + X[:, 1]) * D
        return u, w

    def wage(self, X):
        return self.evaluate(X)[1]

    def payoff(self, X):
        return self.evaluate(X)[0]

    def benchmark(self, x1):
        return benchmark_wage(self.f, self.traits, x1, self.alpha_l)

    def budget_error(self, X) -> float:
        X = _as_pop(X)
        M = self.sol.partner(X)
        gap = self.wage(X) + self.wage(M) - np.asarray(self.f(X[:, 0], M[:, 0]))
        return float(np.max(np.abs(gap)))


def build_schedule(f, traits, sol=None, alpha_l: float = 0.5) -> WageSchedule:
    return WageSchedule(f, traits, sol, alpha_l)


# --------------------------------------------------------------------------
# truth-telling


@dataclass(frozen=True)
class TruthReport:
    truthful_value: float
    best_value: float
    best_x2: float
    gap: float
    passed: bool


def truthtelling_check(f, traits, sol, schedule: WageSchedule, x, candidate_x2,
                       tol: float = 1e-9) -> TruthReport:
    """Is announcing the true x2 optimal among the candidates?"""
    x1, x2 = float(x[0]), float(x[1])
    cands = np.unique(np.append(np.asarray(candidate_x2, dtype=float), x2))
    P = np.column_stack([np.full(cands.size, x1), cands])
    w = schedule.wage(P)
    F = np.asarray(f(P[:, 0], sol.partner(P)[:, 0]), dtype=float)
    val = (1 + 2 * x2) * w - x2 * F
    i_true = int(np.flatnonzero(cands == x2)[0])
    i_best = int(np.argmax(val))
    gap = float(val[i_best] - val[i_true])
    return TruthReport(float(val[i_true]), float(val[i_best]), float(cands[i_best]), gap, gap <= tol)
