"""Model primitives: worker types, production, utility and the TU surplus."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateError, InputError

ArrayLike = float | np.ndarray


def _out(x):
    # keep scalars scalar
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class WorkerType:
    x1: float
    x2: float

    def __post_init__(self):
        if not self.x2 > -0.5:
            raise InputError(f"x2 must exceed -0.5, got {self.x2}")


# --------------------------------------------------------------------------
# production functions


class ProductionFunction:
    kind = "abstract"

    def __call__(self, a, b):
        raise NotImplementedError

    def diag(self, a):
        """Self-match output F(a, a)."""
        return self(a, a)


@dataclass(frozen=True, eq=False)
class Additive(ProductionFunction):
    """F(a, b) = K(a) + K(b) with K strictly increasing."""

    K: Callable[[np.ndarray], np.ndarray]
    dK: Callable[[np.ndarray], np.ndarray]
    label: str = "K"
    kind = "additive"

    def __call__(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return _out(self.K(a) + self.K(b))

    @classmethod
    def linear(cls, slope: float = 1.0, intercept: float = 0.0) -> "Additive":
        if slope <= 0:
            raise InputError("linear K needs a positive slope")
        return cls(lambda x: intercept + slope * np.asarray(x, dtype=float),
                   lambda x: np.full(np.shape(x), slope, dtype=float),
                   label=f"{intercept}+{slope}*x")

    @classmethod
    def power(cls, scale: float = 1.0, exponent: float = 2.0) -> "Additive":
        """K(x) = scale * x**exponent on x > 0."""
        if scale <= 0 or exponent <= 0:
            raise InputError("power K needs positive scale and exponent")

        def K(x):
            x = np.asarray(x, dtype=float)
            if np.any(x <= 0):
                raise InputError("power K is defined for positive skills only")
            return scale * x ** exponent

        return cls(K, lambda x: scale * exponent * np.asarray(x, dtype=float) ** (exponent - 1),
                   label=f"{scale}*x^{exponent}")


@dataclass(frozen=True)
class Binary(ProductionFunction):
    F_ll: float
    F_hl: float
    F_hh: float
    l: float = 0.0
    h: float = 1.0
    kind = "binary"

    def __post_init__(self):
        if not self.h > self.l:
            raise InputError("binary skills need h > l")
        if self.F_hl == self.F_ll:
            raise DegenerateError("F_hl equals F_ll: complementarity ratio undefined")
        if not (self.F_hh > self.F_hl > self.F_ll):
            raise InputError("binary production must satisfy F_hh > F_hl > F_ll")

    def is_high(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        hi = a == self.h
        if not np.all(hi | (a == self.l)):
            raise InputError(f"binary skill must be {self.l} or {self.h}")
        return hi

    def __call__(self, a, b):
        ha = self.is_high(a)
        hb = self.is_high(b)
        table = np.array([[self.F_ll, self.F_hl], [self.F_hl, self.F_hh]])
        return _out(table[ha.astype(int), hb.astype(int)])

    @property
    def a_F(self) -> float:
        return (self.F_hh - self.F_hl) / (self.F_hl - self.F_ll)

    @property
    def s_F(self) -> float:
        return self.F_hl - 0.5 * (self.F_hh + self.F_ll)


@dataclass(frozen=True)
class Multiplicative(ProductionFunction):
    """F(a, b) = A + ((a b)^c - 1) / c on positive skills."""

    A: float = 1.0
    c: float = 1.0
    kind = "multiplicative"

    def __post_init__(self):
        if self.c == 0:
            raise InputError("multiplicative exponent c must be nonzero")

    def __call__(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.any(a <= 0) or np.any(b <= 0):
            raise InputError("multiplicative production needs positive skills")
        return _out(self.A + ((a * b) ** self.c - 1.0) / self.c)


@dataclass(frozen=True, eq=False)
class Tabulated(ProductionFunction):
    """Bilinear interpolation of a symmetric table on a square skill grid."""

    grid: np.ndarray
    table: np.ndarray
    kind = "tabulated"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        t = np.asarray(self.table, dtype=float)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
            raise InputError("grid must be strictly increasing with >= 2 points")
        if t.shape != (g.size, g.size):
            raise InputError(f"table shape {t.shape} does not match grid size {g.size}")
        if not np.array_equal(t, t.T):
            raise InputError("tabulated production must be exactly symmetric")
        if np.any(np.diff(t, axis=0) <= 0):
            raise InputError("tabulated production must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "table", t)

    @classmethod
    def from_function(cls, fn, grid) -> "Tabulated":
        g = np.asarray(grid, dtype=float)
        A, B = np.meshgrid(g, g, indexing="ij")
        t = fn(A, B)
        return cls(g, 0.5 * (t + t.T))

    def __call__(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        g = self.grid
        if np.any((a < g[0]) | (a > g[-1]) | (b < g[0]) | (b > g[-1])):
            raise InputError("skill outside the tabulated grid (no extrapolation)")
        # order the arguments so that symmetry is bit-exact
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        i = np.clip(np.searchsorted(g, lo, side="right") - 1, 0, g.size - 2)
        j = np.clip(np.searchsorted(g, hi, side="right") - 1, 0, g.size - 2)
        ti = (lo - g[i]) / (g[i + 1] - g[i])
        tj = (hi - g[j]) / (g[j + 1] - g[j])
        t = self.table
        v = ((1 - ti) * (1 - tj) * t[i, j] + ti * (1 - tj) * t[i + 1, j]
             + (1 - ti) * tj * t[i, j + 1] + ti * tj * t[i + 1, j + 1])
        return _out(v)


@dataclass(frozen=True, eq=False)
class Shifted(ProductionFunction):
    """F(a, b) + S(a) + S(b) for bases without a closed shifted form."""

    base: ProductionFunction
    S: Callable[[np.ndarray], np.ndarray]

    @property
    def kind(self):
        return "shifted-" + self.base.kind

    def __call__(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return _out(np.asarray(self.base(a, b)) + self.S(a) + self.S(b))


def produce(f: ProductionFunction, a, b):
    return f(a, b)


# --------------------------------------------------------------------------
# SBTC


@dataclass(frozen=True, eq=False)
class SBTCShift:
    """Own-skill shift S. Binary shifts carry the pair (S(l), S(h))."""

    levels: tuple[float, float] | None = None
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    deriv: Callable[[np.ndarray], np.ndarray] | None = None
    probe: tuple[float, float] = (1e-3, 10.0)

    @classmethod
    def binary(cls, s_l: float, s_h: float) -> "SBTCShift":
        return cls(levels=(float(s_l), float(s_h)))

    def __post_init__(self):
        if (self.levels is None) == (self.fn is None):
            raise InputError("SBTCShift needs exactly one of levels or fn")
        if self.levels is not None and not self.levels[1] > self.levels[0]:
            raise InputError("SBTC shift must be increasing: S(h) > S(l)")
        if self.fn is not None:
            x = np.linspace(*self.probe, 257)
            if np.any(np.diff(self.fn(x)) <= 0):
                raise InputError("SBTC shift must be strictly increasing on the probe range")


def apply_sbtc(f: ProductionFunction, s: SBTCShift) -> ProductionFunction:
    if isinstance(f, Binary):
        if s.levels is None:
            raise InputError("binary production needs a binary (S(l), S(h)) shift")
        sl, sh = s.levels
        g = Binary(f.F_ll + 2 * sl, f.F_hl + sl + sh, f.F_hh + 2 * sh, f.l, f.h)
        assert g.s_F == f.s_F or np.isclose(g.s_F, f.s_F, rtol=0, atol=1e-12)
        return g
    if s.fn is None:
        raise InputError("functional production needs a functional shift")
    if isinstance(f, Additive):
        dS = s.deriv if s.deriv is not None else (lambda x: np.zeros(np.shape(x)))
        return Additive(lambda x, K=f.K, S=s.fn: K(x) + S(x),
                        lambda x, dK=f.dK: dK(x) + dS(x), label=f"{f.label}+S")
    return Shifted(f, s.fn)


def blend(f0: Binary, f1: Binary, theta: float) -> Binary:
    """Convex combination theta*F1 + (1-theta)*F0 of two binary technologies."""
    return Binary((1 - theta) * f0.F_ll + theta * f1.F_ll,
                  (1 - theta) * f0.F_hl + theta * f1.F_hl,
                  (1 - theta) * f0.F_hh + theta * f1.F_hh, f0.l, f0.h)


# --------------------------------------------------------------------------
# utility and the TU representation


def utility(w_own, w_co, x2):
    return w_own + x2 * (w_own - w_co)


def rescale(u, x2):
    """TU rescaling 2u / (1 + 2 x2)."""
    return 2.0 * u / (1.0 + 2.0 * x2)


def unrescale(u_tilde, x2):
    return 0.5 * (1.0 + 2.0 * x2) * u_tilde


def surplus(f: ProductionFunction, x1j, x2j, x1k, x2k):
    """Vectorized TU surplus for arrays of worker coordinates."""
    out = np.asarray(f(x1k, x1j))
    return _out(out * (1.0 / (1.0 + 2.0 * np.asarray(x2k)) + 1.0 / (1.0 + 2.0 * np.asarray(x2j))))


def tu_surplus(f: ProductionFunction, j: WorkerType, k: WorkerType) -> float:
    return surplus(f, j.x1, j.x2, k.x1, k.x2)


def frontier_psi(f: ProductionFunction, j: WorkerType, k: WorkerType, u: float) -> float:
    """Best utility for k when j gets u in a (j, k) team."""
    F = f(k.x1, j.x1)
    tk, tj = 1.0 + 2.0 * k.x2, 1.0 + 2.0 * j.x2
    return 0.5 * tk * (F * (1.0 / tk + 1.0 / tj) - 2.0 * u / tj)


def reduce_global_status(x2, x3):
    """Local-status weight equivalent to (x2, x3) with a global status term."""
    x2 = np.asarray(x2, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    if np.any(x2 <= -0.5) or np.any(x3 <= -0.5):
        raise InputError("x2 and x3 must exceed -0.5")
    return _out((x2 - x3) / (1.0 + 2.0 * x3))


def halo_rescaled(w_own, w_co, x2, x3):
    # firm-level output term dropped: it is constant for the individual
    return w_own - w_co + (w_own + w_co) * (1.0 + 2.0 * x3) / (1.0 + 2.0 * x2)


def baseline_rescaled(w_own, w_co, x2):
    return rescale(utility(w_own, w_co, x2), x2)


def binary_descriptors(f: Binary) -> tuple[float, float]:
    if not isinstance(f, Binary):
        raise InputError("binary_descriptors needs a Binary production function")
    return f.a_F, f.s_F
