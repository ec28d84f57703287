"""Brute-force discrete matching: exact optima, duals and closed-form comparisons."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize

from .economy import ProductionFunction, surplus
from .errors import InputError, NumericalError, SizeError
from .sorting import SortingSolution, _as_pop
from .wages import WageSchedule, wage_from_utility

DP_MAX = 22
ENUM_MAX = 12


@dataclass(frozen=True, eq=False)
class DiscreteInstance:
    workers: np.ndarray
    surplus: np.ndarray
    f: ProductionFunction | None = None

    def __post_init__(self):
        W = _as_pop(self.workers)
        P = np.asarray(self.surplus, dtype=float)
        n = W.shape[0]
        if n < 2 or n % 2:
            raise InputError(f"instance size must be even and >= 2, got {n}")
        if P.shape != (n, n) or not np.array_equal(P, P.T) or not np.all(np.isfinite(P)):
            raise InputError("surplus matrix must be finite, square and exactly symmetric")
        object.__setattr__(self, "workers", W)
        object.__setattr__(self, "surplus", P)

    @property
    def n(self) -> int:
        return self.workers.shape[0]


@dataclass(frozen=True, eq=False)
class MatchingResult:
    partner: np.ndarray
    total_surplus: float
    method: str
    dual: np.ndarray | None = field(default=None)

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, int(j)) for i, j in enumerate(self.partner) if i < j]


def surplus_matrix(f: ProductionFunction, X) -> np.ndarray:
    X = _as_pop(X)
    a, b = X[:, 0], X[:, 1]
    return np.asarray(surplus(f, a[:, None], b[:, None], a[None, :], b[None, :]), dtype=float)


def instance_from_workers(f: ProductionFunction, X) -> DiscreteInstance:
    return DiscreteInstance(_as_pop(X), surplus_matrix(f, X), f)


def build_instance(f: ProductionFunction, traits, n: int, seed=None) -> DiscreteInstance:
    if int(n) != n or n < 2 or n % 2:
        raise InputError(f"instance size must be even and >= 2, got {n}")
    return instance_from_workers(f, traits.sample(int(n), seed))


def build_closed_instance(sol: SortingSolution, n: int, seed=None) -> DiscreteInstance:
    """Sample n/2 workers and add each one's closed-form partner.

    Self-matchers get an identical clone. On such a population the
    closed-form pairing (i, i + n/2) is an optimal matching.
    """
    if int(n) != n or n < 2 or n % 2:
        raise InputError(f"instance size must be even and >= 2, got {n}")
    X = sol.traits.sample(int(n) // 2, seed)
    P = sol.partner(X)
    P[sol.is_selfmatch(X)] = X[sol.is_selfmatch(X)]
    return instance_from_workers(sol.f, np.vstack([X, P]))


def matching_value(P: np.ndarray, partner: np.ndarray) -> float:
    """Sum over pairs of the pair surplus, exactly rounded."""
    return math.fsum(P[i, j] for i, j in enumerate(partner) if i < j)


# --------------------------------------------------------------------------
# exact solvers


@lru_cache(maxsize=None)
def _all_matchings(n: int) -> np.ndarray:
    """Every perfect matching of range(n) as an (count, n/2, 2) array."""
    def rec(items):
        if not items:
            yield []
            return
        a = items[0]
        for k in range(1, len(items)):
            rest = items[1:k] + items[k + 1:]
            for m in rec(rest):
                yield [(a, items[k])] + m
    return np.array(list(rec(tuple(range(n)))), dtype=np.int64)


def _partner_from_pairs(pairs, n) -> np.ndarray:
    p = np.empty(n, dtype=np.int64)
    for a, b in pairs:
        p[a], p[b] = b, a
    return p


def match_enumerate(inst: DiscreteInstance) -> MatchingResult:
    if inst.n > ENUM_MAX:
        raise SizeError(f"enumeration is limited to n <= {ENUM_MAX}, got {inst.n}")
    M = _all_matchings(inst.n)
    vals = inst.surplus[M[:, :, 0], M[:, :, 1]].sum(axis=1)
    best = int(np.argmax(vals))
    p = _partner_from_pairs(M[best], inst.n)
    return MatchingResult(p, matching_value(inst.surplus, p), "enumerate")


def _popcount(x: np.ndarray) -> np.ndarray:
    c = np.zeros(x.shape, dtype=np.int64)
    y = x.copy()
    while np.any(y):
        c += y & 1
        y >>= 1
    return c


@lru_cache(maxsize=4)
def _layers(n: int):
    masks = np.arange(1 << n, dtype=np.int64)
    pc = _popcount(masks)
    return [masks[pc == k] for k in range(0, n + 1, 2)]


def match_dp(inst: DiscreteInstance) -> MatchingResult:
    """Subset DP: best[S] pairs the lowest member of S with some other member."""
    n = inst.n
    if n > DP_MAX:
        raise SizeError(f"subset DP is limited to n <= {DP_MAX}, got {n}")
    P = inst.surplus
    best = np.full(1 << n, -np.inf)
    best[0] = 0.0
    choice = np.full(1 << n, -1, dtype=np.int8)
    for M in _layers(n)[1:]:
        low = M & -M
        i = np.log2(low).astype(np.int64)
        rest = M ^ low
        bv = np.full(M.size, -np.inf)
        bj = np.full(M.size, -1, dtype=np.int8)
        for j in range(1, n):
            sel = np.flatnonzero((rest >> j) & 1)
            if sel.size == 0:
                continue
            cand = best[rest[sel] ^ (1 << j)] + P[i[sel], j]
            up = cand > bv[sel]
            bv[sel[up]] = cand[up]
            bj[sel[up]] = j
        best[M] = bv
        choice[M] = bj
    pairs = []
    S = (1 << n) - 1
    while S:
        i = (S & -S).bit_length() - 1
        j = int(choice[S])
        pairs.append((i, j))
        S ^= (1 << i) | (1 << j)
    p = _partner_from_pairs(pairs, n)
    return MatchingResult(p, matching_value(P, p), "bitmask-dp")


def match_exact(inst: DiscreteInstance, method: str = "dp") -> MatchingResult:
    if method == "dp":
        return match_dp(inst)
    if method == "enumerate":
        return match_enumerate(inst)
    raise InputError(f"unknown method {method!r}")


def values_agree(a: float, b: float, rtol: float = 1e-12) -> bool:
    return a == b or abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


# --------------------------------------------------------------------------
# duals


def _clone_groups(X: np.ndarray) -> list[np.ndarray]:
    _, inv = np.unique(X, axis=0, return_inverse=True)
    inv = np.asarray(inv).ravel()
    return [np.flatnonzero(inv == g) for g in range(inv.max() + 1)]


def dual_payoffs(inst: DiscreteInstance, result: MatchingResult, tol: float = 1e-9) -> np.ndarray:
    """Rescaled payoffs u~ supporting `result` as a competitive equilibrium.

    Solves min sum(u~) subject to u~_i + u~_j >= Pi_ij with HiGHS, averages
    over clone groups, then certifies feasibility and zero duality gap.
    """
    n, P = inst.n, inst.surplus
    iu, ju = np.triu_indices(n, 1)
    A = np.zeros((iu.size, n))
    A[np.arange(iu.size), iu] = -1.0
    A[np.arange(iu.size), ju] = -1.0
    res = optimize.linprog(np.ones(n), A_ub=A, b_ub=-P[iu, ju], bounds=[(None, None)] * n,
                           method="highs")
    if res.status != 0:
        raise NumericalError(f"dual LP failed: {res.message}")
    u = res.x.copy()
    for g in _clone_groups(inst.workers):
        u[g] = u[g].mean()
    scale = max(1.0, float(np.abs(P).max()))
    slack = u[:, None] + u[None, :] - P
    np.fill_diagonal(slack, np.inf)
    if slack.min() < -tol * scale:
        # tiny LP infeasibility: lift everyone by half the worst violation
        u += 0.5 * max(0.0, -slack.min())
        slack = u[:, None] + u[None, :] - P
        np.fill_diagonal(slack, np.inf)
    gap = abs(u.sum() - result.total_surplus)
    if gap > 1e-9 * scale * n or slack.min() < -tol * scale:
        raise NumericalError(
            f"no supporting payoffs: duality gap {gap:.3e}, worst violation {slack.min():.3e}"
            " (odd-cycle instance or non-optimal matching)")
    return u


def assignment_potentials(A: np.ndarray, sigma: np.ndarray, tol: float = 1e-13,
                          max_iter: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """Dual prices supporting an optimal assignment sigma of max sum A[i, sigma(i)].

    Prices solve p_j >= p_sigma(i) + A_ij - A_i,sigma(i), the smallest such
    p >= 0 found by label-correcting (longest paths; optimality rules out
    positive cycles). Returns (pi, p) with pi_i + p_j >= A_ij.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    own = A[np.arange(n), sigma]
    C = A - own[:, None]
    p = np.zeros(n)
    for _ in range(max_iter):
        new = np.maximum(p, (p[sigma][:, None] + C).max(axis=0))
        if np.all(new <= p + tol):
            break
        p = new
    else:
        raise NumericalError("price recovery did not converge; assignment not optimal?")
    pi = (A - p[None, :]).max(axis=1)
    return pi, p


@dataclass(frozen=True, eq=False)
class RelaxationResult:
    workers: np.ndarray
    assignment: np.ndarray
    u_tilde: np.ndarray
    payoff: np.ndarray
    wage: np.ndarray
    value: float


def relaxation_duals(f: ProductionFunction, X) -> RelaxationResult:
    """Large-n path: symmetric assignment with the diagonal allowed.

    Self-assignment stands for pairing with a clone. The symmetrized duals
    (pi + prices)/2 are feasible rescaled payoffs for the one-sided problem.
    """
    X = _as_pop(X)
    P = surplus_matrix(f, X)
    _, sigma = optimize.linear_sum_assignment(P, maximize=True)
    pi, prices = assignment_potentials(P, sigma)
    ut = 0.5 * (pi + prices)
    u = 0.5 * (1.0 + 2.0 * X[:, 1]) * ut
    Fm = np.asarray(f(X[:, 0], X[sigma, 0]), dtype=float)
    w = wage_from_utility(u, X[:, 1], Fm)
    return RelaxationResult(X, sigma, ut, u, np.asarray(w), float(P[np.arange(len(X)), sigma].sum()))


# --------------------------------------------------------------------------
# comparison with closed forms


@dataclass(frozen=True)
class CompareReport:
    n: int
    optimal_value: float
    closed_value: float | None
    surplus_gap: float | None
    pam_violations: int
    wage_gap: float | None
    payoff_gap: float | None

    def ok(self, gap_tol: float = 1e-9) -> bool:
        gap_ok = self.surplus_gap is None or self.surplus_gap <= gap_tol
        return gap_ok and self.pam_violations == 0


def pam_violations(X, partner, index, tol: float = 1e-9) -> int:
    """Pairs with x1_i > x1_k whose partners' index is ordered the other way."""
    X = _as_pop(X)
    v = np.asarray(index)[np.asarray(partner)]
    dx = X[:, 0][:, None] - X[:, 0][None, :]
    dv = v[:, None] - v[None, :]
    return int(np.count_nonzero((dx > tol) & (dv < -tol)))


def closed_form_matching(sol: SortingSolution, inst: DiscreteInstance) -> np.ndarray:
    """Pairing closest to the closed-form rule on this sample.

    Minimizes the total rank distance between each worker's partner and
    the partner the closed form prescribes, by the same subset DP.
    """
    X = inst.workers
    H1 = sol.traits.marginal(1)
    M = sol.partner(X)
    u_x, v_x = np.asarray(H1.cdf(X[:, 0]), dtype=float), np.asarray(sol.v1(X), dtype=float)
    u_m, v_m = np.asarray(H1.cdf(M[:, 0]), dtype=float), np.asarray(sol.v1(M), dtype=float)
    # d[i, j]: distance from worker j to the prescribed partner of i
    d = np.abs(u_x[None, :] - u_m[:, None]) + np.abs(v_x[None, :] - v_m[:, None])
    D = d + d.T
    if inst.n > DP_MAX:
        raise SizeError("closed-form matching uses the subset DP")
    res = match_dp(DiscreteInstance(X, -D))
    return res.partner


def compare(sol: SortingSolution | None, schedule: WageSchedule | None, inst: DiscreteInstance,
            result: MatchingResult, index=None, dual: np.ndarray | None = None,
            tol: float = 1e-9) -> CompareReport:
    X = inst.workers
    closed_value = gap = None
    if sol is not None:
        cp = closed_form_matching(sol, inst)
        closed_value = matching_value(inst.surplus, cp)
        gap = max(0.0, (result.total_surplus - closed_value) / max(abs(result.total_surplus), 1e-300))
    if index is None:
        if sol is None:
            raise InputError("need a closed-form solution or an explicit index")
        index = sol.v1(X)
    viol = pam_violations(X, result.partner, index, tol)
    wage_gap = payoff_gap = None
    if dual is not None and schedule is not None:
        u_dual = 0.5 * (1 + 2 * X[:, 1]) * dual
        Fm = np.asarray(inst.f(X[:, 0], X[result.partner, 0]), dtype=float)
        w_dual = wage_from_utility(u_dual, X[:, 1], Fm)
        u_cf, w_cf = schedule.evaluate(X)
        wage_gap = float(np.max(np.abs(w_dual - w_cf)))
        payoff_gap = float(np.max(np.abs(u_dual - u_cf)))
    return CompareReport(inst.n, result.total_surplus, closed_value, gap, viol, wage_gap, payoff_gap)


def bucket_gap(a, b, keys) -> float:
    """Largest gap between bucket means of a and b."""
    keys = np.asarray(keys)
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = np.asarray(inv).ravel()
    cnt = np.bincount(inv)
    ma = np.bincount(inv, weights=np.asarray(a)) / cnt
    mb = np.bincount(inv, weights=np.asarray(b)) / cnt
    return float(np.max(np.abs(ma - mb)))


def core_slack(inst: DiscreteInstance, u_tilde, partner) -> tuple[float, float]:
    """(worst blocking slack, worst pair budget error) of rescaled payoffs.

    Payoffs are in the core of the instance when the first value is >= 0
    and the second is 0, up to rounding.
    """
    u = np.asarray(u_tilde, dtype=float)
    P = inst.surplus
    S = u[:, None] + u[None, :] - P
    np.fill_diagonal(S, np.inf)
    p = np.asarray(partner)
    return float(S.min()), float(np.max(np.abs(u + u[p] - P[np.arange(inst.n), p])))
