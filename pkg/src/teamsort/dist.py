"""Trait distributions: marginals, joint laws and scenario constructors."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats
from scipy.stats import qmc

from .economy import Additive, Binary, Multiplicative, ProductionFunction, WorkerType
from .errors import DegenerateError, InputError, UnsupportedCaseError


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


# --------------------------------------------------------------------------
# marginals


class Marginal:
    continuous = True

    def cdf(self, x):
        raise NotImplementedError

    def ppf(self, q):
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        return float(self.ppf(0.0)), float(self.ppf(1.0))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self.ppf(rng.random(n)), dtype=float)

    def mean(self) -> float:
        # Gauss-Legendre on the quantile function; subclasses override when closed
        q, wts = np.polynomial.legendre.leggauss(200)
        return float(0.5 * np.sum(wts * self.ppf(0.5 * (q + 1))))


@dataclass(frozen=True)
class Uniform(Marginal):
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not self.b > self.a:
            raise InputError(f"Uniform needs b > a, got [{self.a}, {self.b}]")

    def cdf(self, x):
        return _out(np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0))

    def ppf(self, q):
        q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
        return _out(self.a + (self.b - self.a) * q)

    def mean(self):
        return 0.5 * (self.a + self.b)


@dataclass(frozen=True)
class Normal(Marginal):
    mean_: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise InputError("Normal needs sd > 0")

    def cdf(self, x):
        return _out(special.ndtr((np.asarray(x, dtype=float) - self.mean_) / self.sd))

    def ppf(self, q):
        return _out(self.mean_ + self.sd * special.ndtri(np.asarray(q, dtype=float)))

    def mean(self):
        return self.mean_


@dataclass(frozen=True)
class LogNormal(Marginal):
    """exp(N(delta, omega)); omega is the variance of the log."""

    delta: float = 0.0
    omega: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise InputError("LogNormal needs omega > 0")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.where(x > 0, x, 1.0)) - self.delta) / np.sqrt(self.omega)
        return _out(np.where(x > 0, special.ndtr(z), 0.0))

    def ppf(self, q):
        return _out(np.exp(self.delta + np.sqrt(self.omega) * special.ndtri(np.asarray(q, dtype=float))))

    def mean(self):
        return float(np.exp(self.delta + 0.5 * self.omega))


@dataclass(frozen=True, eq=False)
class Affine(Marginal):
    """loc + scale * Y. A negative scale needs a continuous base."""

    base: Marginal
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.scale == 0:
            raise InputError("Affine scale must be nonzero")
        if self.scale < 0 and not self.base.continuous:
            raise InputError("negative scale on a discrete base; use negate()")

    @property
    def continuous(self):
        return self.base.continuous

    def cdf(self, x):
        y = (np.asarray(x, dtype=float) - self.loc) / self.scale
        if self.scale > 0:
            return self.base.cdf(y)
        return _out(1.0 - np.asarray(self.base.cdf(y)))

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if self.scale > 0:
            return _out(self.loc + self.scale * np.asarray(self.base.ppf(q)))
        return _out(self.loc + self.scale * np.asarray(self.base.ppf(1.0 - q)))

    def mean(self):
        return self.loc + self.scale * self.base.mean()


@dataclass(frozen=True, eq=False)
class Discrete(Marginal):
    atoms: np.ndarray
    weights: np.ndarray
    continuous = False

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if a.size == 0 or a.size != w.size:
            raise InputError("Discrete needs matching, nonempty atoms and weights")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("Discrete weights must be nonnegative and sum to 1")
        order = np.argsort(a, kind="stable")
        object.__setattr__(self, "atoms", a[order])
        object.__setattr__(self, "weights", w[order])
        object.__setattr__(self, "_cw", np.cumsum(w[order]))

    @classmethod
    def point(cls, x: float) -> "Discrete":
        return cls(np.array([x]), np.array([1.0]))

    def cdf(self, x):
        idx = np.searchsorted(self.atoms, np.asarray(x, dtype=float), side="right")
        cw = np.concatenate([[0.0], self._cw])
        return _out(np.minimum(cw[idx], 1.0))

    def ppf(self, q):
        # left-continuous generalized inverse inf{x : F(x) >= q}
        q = np.asarray(q, dtype=float)
        idx = np.searchsorted(self._cw, q - 1e-15, side="left")
        return _out(self.atoms[np.clip(idx, 0, self.atoms.size - 1)])

    def mean(self):
        return float(np.dot(self.atoms, self.weights))


@dataclass(frozen=True, eq=False)
class Empirical(Marginal):
    values: np.ndarray
    continuous = False

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise InputError("Empirical needs at least one value")
        object.__setattr__(self, "values", v)

    def cdf(self, x):
        return _out(np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.values.size)

    def ppf(self, q):
        n = self.values.size
        k = np.ceil(np.asarray(q, dtype=float) * n - 1e-9).astype(int) - 1
        return _out(self.values[np.clip(k, 0, n - 1)])

    def mean(self):
        return float(self.values.mean())


@dataclass(frozen=True, eq=False)
class Mixture(Marginal):
    """Equal-or-weighted mixture; the quantile is found by vectorized bisection."""

    parts: tuple
    weights: tuple

    @property
    def continuous(self):
        return all(p.continuous for p in self.parts)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(sum(w * np.asarray(p.cdf(x)) for p, w in zip(self.parts, self.weights)))

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        lo = np.full(q.shape, min(p.ppf(0.0) for p in self.parts), dtype=float)
        hi = np.full(q.shape, max(p.ppf(1.0) for p in self.parts), dtype=float)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            lo = np.minimum.reduce([np.asarray(p.ppf(q), dtype=float) for p in self.parts])
            hi = np.maximum.reduce([np.asarray(p.ppf(q), dtype=float) for p in self.parts])
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = np.asarray(self.cdf(mid)) < q
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-14 * np.maximum(1.0, np.abs(hi))):
                break
        return _out(hi)

    def mean(self):
        return float(sum(w * p.mean() for p, w in zip(self.parts, self.weights)))


def negate(m: Marginal) -> Marginal:
    """Law of -X."""
    if isinstance(m, Uniform):
        return Uniform(-m.b, -m.a)
    if isinstance(m, Discrete):
        return Discrete(-m.atoms, m.weights)
    return Affine(m, 0.0, -1.0)


# --------------------------------------------------------------------------
# joint laws


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _check_n(n):
    if int(n) != n or n < 1:
        raise InputError(f"sample size must be a positive integer, got {n}")
    return int(n)


def _sobol(n: int, seed) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        # qmc takes ints and Generators but not SeedSequences
        pts = qmc.Sobol(d=2, scramble=True, seed=np.random.default_rng(seed)).random(n)
    return np.clip(pts, 1e-12, 1 - 1e-12)


class TraitDistribution:
    """Joint law of (x1, x2). Samples are float arrays of shape (n, 2)."""

    kind = "abstract"

    def sample(self, n: int, seed=None) -> np.ndarray:
        raise NotImplementedError

    def stratified(self, n: int, seed=None) -> np.ndarray:
        """Low-discrepancy population used for large-n convergence checks."""
        return self.sample(n, seed)

    def marginal(self, k: int) -> Marginal:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Product(TraitDistribution):
    m1: Marginal
    m2: Marginal
    kind = "product"

    def _from_uniform(self, u):
        return np.column_stack([self.m1.ppf(u[:, 0]), self.m2.ppf(u[:, 1])])

    def sample(self, n, seed=None):
        return self._from_uniform(_rng(seed).random((_check_n(n), 2)))

    def stratified(self, n, seed=None):
        return self._from_uniform(_sobol(_check_n(n), seed))

    def marginal(self, k):
        return self.m1 if k == 1 else self.m2


@dataclass(frozen=True, eq=False)
class GaussianCopula(TraitDistribution):
    m1: Marginal
    m2: Marginal
    rho: float = 0.0
    kind = "gaussian-copula"

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise InputError(f"copula correlation must lie in [-1, 1], got {self.rho}")

    def _from_normal(self, z):
        z2 = self.rho * z[:, 0] + np.sqrt(max(0.0, 1.0 - self.rho ** 2)) * z[:, 1]
        return np.column_stack([self.m1.ppf(special.ndtr(z[:, 0])), self.m2.ppf(special.ndtr(z2))])

    def sample(self, n, seed=None):
        return self._from_normal(_rng(seed).standard_normal((_check_n(n), 2)))

    def stratified(self, n, seed=None):
        return self._from_normal(special.ndtri(_sobol(_check_n(n), seed)))

    def marginal(self, k):
        return self.m1 if k == 1 else self.m2


@dataclass(frozen=True)
class LogNormalJoint(TraitDistribution):
    """(ln x1, ln(1 + 2 x2)) jointly normal with means delta and covariance omega."""

    delta1: float = 0.0
    delta2: float = 0.0
    omega11: float = 1.0
    omega12: float = 0.0
    omega22: float = 1.0
    kind = "lognormal-joint"

    def __post_init__(self):
        if self.omega11 < 0 or self.omega22 < 0:
            raise InputError("log-normal variances must be nonnegative")
        if self.omega11 * self.omega22 - self.omega12 ** 2 < -1e-12:
            raise InputError("log-normal covariance matrix is not positive semidefinite")

    def _from_normal(self, e):
        s1 = np.sqrt(self.omega11)
        z1 = self.delta1 + s1 * e[:, 0]
        if s1 > 0:
            b = self.omega12 / s1
            rest = np.sqrt(max(0.0, self.omega22 - b * b))
        else:
            b, rest = 0.0, np.sqrt(self.omega22)
        z2 = self.delta2 + b * e[:, 0] + rest * e[:, 1]
        return np.column_stack([np.exp(z1), 0.5 * np.expm1(z2)])

    def sample(self, n, seed=None):
        return self._from_normal(_rng(seed).standard_normal((_check_n(n), 2)))

    def stratified(self, n, seed=None):
        return self._from_normal(special.ndtri(_sobol(_check_n(n), seed)))

    def marginal(self, k):
        if k == 1:
            return LogNormal(self.delta1, self.omega11)
        return Affine(LogNormal(self.delta2, self.omega22), -0.5, 0.5)


@dataclass(frozen=True, eq=False)
class BinarySkill(TraitDistribution):
    """Half the workers are high-skill; x2 | skill has law G_h or G_l."""

    G_l: Marginal
    G_h: Marginal
    l: float = 0.0
    h: float = 1.0
    p: float = 0.5
    kind = "binary-skill"

    def __post_init__(self):
        if self.p != 0.5:
            raise InputError(f"BinarySkill requires p = 0.5 (got p = {self.p})")
        if not self.h > self.l:
            raise InputError("binary skills need h > l")
        for name, g in (("G_l", self.G_l), ("G_h", self.G_h)):
            lo = g.ppf(0.0)
            if not lo > -0.5:
                raise InputError(f"{name} support must lie in (-0.5, inf), lower end is {lo}")

    def T_h(self, y):
        return _out(np.asarray(self.G_h.ppf(y)) + 0.5)

    def T_l(self, y):
        return _out(np.asarray(self.G_l.ppf(1.0 - np.asarray(y, dtype=float))) + 0.5)

    def ratio(self, y):
        return _out(np.asarray(self.T_h(y)) / np.asarray(self.T_l(y)))

    def G(self, high: bool) -> Marginal:
        return self.G_h if high else self.G_l

    def sample(self, n, seed=None):
        n = _check_n(n)
        rng = _rng(seed)
        high = rng.random(n) < 0.5
        u = rng.random(n)
        x2 = np.where(high, self.G_h.ppf(u), self.G_l.ppf(u))
        return np.column_stack([np.where(high, self.h, self.l), x2])

    def stratified(self, n, seed=None):
        n = _check_n(n)
        m_h = n // 2
        m_l = n - m_h
        qh = (np.arange(m_h) + 0.5) / m_h
        ql = (np.arange(m_l) + 0.5) / m_l
        x1 = np.concatenate([np.full(m_h, self.h), np.full(m_l, self.l)])
        x2 = np.concatenate([np.asarray(self.G_h.ppf(qh)), np.asarray(self.G_l.ppf(ql))])
        return np.column_stack([x1, x2])

    def marginal(self, k):
        if k == 1:
            return Discrete(np.array([self.l, self.h]), np.array([0.5, 0.5]))
        return Mixture((self.G_l, self.G_h), (0.5, 0.5))


@dataclass(frozen=True, eq=False)
class EmpiricalJoint(TraitDistribution):
    points: np.ndarray
    kind = "empirical"

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] == 0:
            raise InputError("EmpiricalJoint needs an (n, 2) array")
        if np.any(p[:, 1] <= -0.5):
            raise InputError("EmpiricalJoint x2 values must exceed -0.5")
        object.__setattr__(self, "points", p)

    def sample(self, n, seed=None):
        idx = _rng(seed).integers(0, self.points.shape[0], _check_n(n))
        return self.points[idx].copy()

    def marginal(self, k):
        return Empirical(self.points[:, k - 1])


def sample(d: TraitDistribution, n: int, seed=None) -> np.ndarray:
    return d.sample(n, seed)


def sample_workers(d: TraitDistribution, n: int, seed=None) -> list[WorkerType]:
    return [WorkerType(float(a), float(b)) for a, b in d.sample(n, seed)]


def T_h(d: BinarySkill, y):
    return d.T_h(y)


def T_l(d: BinarySkill, y):
    return d.T_l(y)


# --------------------------------------------------------------------------
# exchangeability


@dataclass(frozen=True)
class ExchangeabilityReport:
    max_asymmetry: float
    tolerance: float
    n: int
    grid_size: int

    @property
    def passed(self) -> bool:
        return self.max_asymmetry <= self.tolerance


def check_exchangeable(d: TraitDistribution, index_fn, grid_size: int = 64,
                       n: int = 100_000, seed=0) -> ExchangeabilityReport:
    """Empirical-copula symmetry test for (x1, index(x)).

    `index_fn` maps an (n, 2) sample to the index values, typically the
    skill-preference index. The tolerance is three Monte Carlo standard
    errors of the worst grid cell.
    """
    X = d.sample(n, seed)
    U = stats.rankdata(X[:, 0], method="max") / n
    V = stats.rankdata(np.asarray(index_fn(X)), method="max") / n
    edges = np.arange(1, grid_size) / grid_size
    iu = np.searchsorted(edges, U, side="left")
    iv = np.searchsorted(edges, V, side="left")
    counts = np.zeros((grid_size, grid_size))
    np.add.at(counts, (iu, iv), 1.0)
    C = counts.cumsum(0).cumsum(1)[:-1, :-1] / n
    D = C - C.T
    cu = np.diag(C)
    # P(exactly one of {U<=u, V<=v} and {U<=v, V<=u}) drives the cell variance
    m = np.minimum.outer(cu, cu)
    p_xor = np.clip(C + C.T - 2 * np.minimum(m, np.minimum(C, C.T)), 0.0, None)
    se = np.sqrt(np.clip(p_xor - D ** 2, 0.0, None) / n)
    return ExchangeabilityReport(float(np.abs(D).max()), float(3.0 * se.max() + 1e-12), n, grid_size)


# --------------------------------------------------------------------------
# scenario constructors


def _pearson_gaussian_copula(m1: Marginal, kappa: float, nodes: int = 96) -> float:
    """Pearson correlation of (Q(Phi(z)), Q(Phi(z'))) with corr(z, z') = kappa."""
    t, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    z1, z2 = np.meshgrid(t, t, indexing="ij")
    W = np.outer(w, w)
    top = np.nextafter(1.0, 0.0)  # ndtr rounds to 1 at the outer nodes
    a = np.asarray(m1.ppf(np.clip(special.ndtr(z1), 0.0, top)))
    zb = kappa * z1 + np.sqrt(max(0.0, 1 - kappa ** 2)) * z2
    b = np.asarray(m1.ppf(np.clip(special.ndtr(zb), 0.0, top)))
    ma, mb = (W * a).sum(), (W * b).sum()
    va = (W * (a - ma) ** 2).sum()
    vb = (W * (b - mb) ** 2).sum()
    return float((W * (a - ma) * (b - mb)).sum() / np.sqrt(va * vb))


def construct_rho_scenario(f: ProductionFunction, m1: Marginal | None, rho: float,
                           m2: Marginal | None = None, delta2: float = 0.0) -> TraitDistribution:
    """Traits with the given skill marginal whose equilibrium Corr(x1, mu1) is rho.

    Raises InputError when rho lies outside the attainable range, which for
    asymmetric skill marginals excludes -1.
    """
    if not -1.0 <= rho <= 1.0:
        raise InputError("rho must lie in [-1, 1]")
    if isinstance(f, Additive):
        m2 = m2 if m2 is not None else Uniform(0.0, 1.0)
        if rho == 1.0:
            return GaussianCopula(m1, m2, -1.0)
        # co-worker skill has a Gaussian copula with parameter -tau against x1
        g = lambda k: _pearson_gaussian_copula(m1, k)
        lo = g(-1.0)
        if rho == -1.0 and lo <= -1 + 1e-9:
            return GaussianCopula(m1, m2, 1.0)
        if rho < lo - 1e-12:
            raise InputError(f"rho={rho} unattainable for this skill marginal (minimum {lo:.6f})")
        kappa = optimize.brentq(lambda k: g(k) - rho, -1.0, 1.0, xtol=1e-13) if rho > lo else -1.0
        return GaussianCopula(m1, m2, -kappa)
    if isinstance(f, Binary):
        a = f.a_F
        target = 0.5 * (1.0 + rho)  # Corr = 2*ybar - 1

        def traits(t):
            return BinarySkill(G_l=Uniform(0.5 + (1 + t) / a, 1.5 + (1 + t) / a),
                               G_h=Uniform(0.5 + (1 - t) * a, 1.5 + (1 - t) * a), l=f.l, h=f.h)

        from .sorting import binary_cutoff
        if rho in (-1.0, 1.0):
            return traits(rho)
        t = optimize.brentq(lambda t: binary_cutoff(a, traits(t)) - target, -1.0, 1.0, xtol=1e-14)
        return traits(t)
    if isinstance(f, Multiplicative):
        if not isinstance(m1, LogNormal):
            raise InputError("multiplicative scenarios need a LogNormal skill marginal")
        c, w11 = f.c, m1.omega
        s = np.sign(c)
        kappa = lambda t: s * (1 - 2 * s * t) / np.sqrt(5 - 4 * s * t)
        pearson = lambda k: np.expm1(k * w11) / np.expm1(w11)
        lo = pearson(-1.0)
        if rho < lo - 1e-12:
            raise InputError(f"rho={rho} unattainable for log-normal skills (minimum {lo:.6f})")
        if rho <= lo:
            t = 1.0
        elif rho >= 1.0:
            t = -1.0
        else:
            t = optimize.brentq(lambda t: pearson(kappa(t)) - rho, -1.0, 1.0, xtol=1e-14)
        w22 = 4 * c * c * w11
        return LogNormalJoint(m1.delta, delta2, w11, t * np.sqrt(w11 * w22), w22)
    raise UnsupportedCaseError(f"no rho construction for production kind {f.kind!r}")


def inequity_aversion_traits(alpha_dist: Marginal, beta_dist: Marginal,
                             l: float = 0.0, h: float = 1.0) -> BinarySkill:
    """Binary traits equivalent to inequity aversion (envy alpha, guilt beta)."""
    a_lo, _ = alpha_dist.support()
    b_lo, b_hi = beta_dist.support()
    if a_lo < 0:
        raise InputError("inequity-aversion alpha must be nonnegative")
    if b_lo < 0 or not b_hi < 0.5:
        raise InputError("inequity-aversion beta must lie in [0, 0.5)")
    return BinarySkill(G_l=alpha_dist, G_h=negate(beta_dist), l=l, h=h)
