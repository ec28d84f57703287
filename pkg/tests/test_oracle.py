import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from teamsort import oracle
from teamsort.dist import BinarySkill, LogNormalJoint, Product, Uniform
from teamsort.economy import Additive, Binary, Multiplicative, Tabulated, WorkerType, tu_surplus
from teamsort.errors import InputError, SizeError
from teamsort.sorting import empirical_index, solve_sorting
from teamsort.wages import WageSchedule

U01 = Uniform(0.0, 1.0)
REF = Binary(0.0, 2.0, 3.0)
REF_T = BinarySkill(U01, U01)


def test_build_instance_pair():
    inst = oracle.build_instance(REF, REF_T, 2, 0)
    X = inst.workers
    res = oracle.match_exact(inst)
    assert list(res.partner) == [1, 0]
    assert res.total_surplus == tu_surplus(REF, WorkerType(*X[0]), WorkerType(*X[1]))


def test_build_instance_shape():
    inst = oracle.build_instance(REF, REF_T, 12, 3)
    assert inst.surplus.shape == (12, 12)
    assert np.array_equal(inst.surplus, inst.surplus.T)


def test_clone_pair_surplus():
    X = np.array([[1.0, 0.3], [1.0, 0.3]])
    P = oracle.surplus_matrix(REF, X)
    assert P[0, 1] == 2 * 3.0 / 1.6


def test_odd_size_rejected():
    with pytest.raises(InputError):
        oracle.build_instance(REF, REF_T, 5, 0)


def test_size_limits():
    X = np.zeros((24, 2))
    inst = oracle.DiscreteInstance(X, np.zeros((24, 24)))
    with pytest.raises(SizeError):
        oracle.match_dp(inst)
    with pytest.raises(SizeError):
        oracle.match_enumerate(oracle.DiscreteInstance(X[:14], np.zeros((14, 14))))


def test_constructed_dominant_matching():
    P = np.zeros((4, 4))
    P[0, 1] = P[1, 0] = P[2, 3] = P[3, 2] = 1.0
    inst = oracle.DiscreteInstance(np.zeros((4, 2)), P)
    for method in ("dp", "enumerate"):
        res = oracle.match_exact(inst, method)
        assert res.pairs() == [(0, 1), (2, 3)]
        assert res.total_surplus == 2.0


@given(st.sampled_from([2, 4, 6, 8, 10]).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-5.0, 5.0))))
def test_dp_equals_enumeration(A):
    P = A + A.T
    inst = oracle.DiscreteInstance(np.zeros((len(P), 2)), P)
    a, b = oracle.match_dp(inst).total_surplus, oracle.match_enumerate(inst).total_surplus
    assert oracle.values_agree(a, b)


def test_reference_stratified_pattern():
    sol = solve_sorting(REF, REF_T)
    # two high and two low workers fall on the self-matching side of the cutoff
    hi = [0.05, 0.1, 0.3, 0.5, 0.7, 0.9]
    lo = [0.1, 0.3, 0.5, 0.7, 0.9, 0.95]
    X = np.array([[1.0, r] for r in hi] + [[0.0, r] for r in lo])
    inst = oracle.instance_from_workers(REF, X)
    res = oracle.match_dp(inst)
    cross = X[:, 0] != X[res.partner, 0]
    assert np.array_equal(cross, sol.crosses(X))
    cf = oracle.closed_form_matching(sol, inst)
    assert abs(oracle.matching_value(inst.surplus, cf) - res.total_surplus) <= 1e-9 * res.total_surplus


@pytest.mark.parametrize("f,t", [(REF, REF_T), (Additive.linear(), Product(U01, U01)),
                                 (Multiplicative(1.0, 1.0), LogNormalJoint(0.0, 1.0, 0.2, 0.05, 0.1))])
def test_dual_payoffs_strong_duality(f, t):
    sol = solve_sorting(f, t)
    inst = oracle.build_closed_instance(sol, 12, 4)
    res = oracle.match_dp(inst)
    u = oracle.dual_payoffs(inst, res)
    assert abs(u.sum() - res.total_surplus) <= 1e-9 * max(1.0, res.total_surplus)
    slack, budget = oracle.core_slack(inst, u, res.partner)
    assert slack >= -1e-9 and budget <= 1e-9


@pytest.mark.parametrize("f,t", [(REF, REF_T), (Additive.linear(), Product(U01, U01)),
                                 (Multiplicative(1.0, -0.5), LogNormalJoint(0.0, 1.0, 0.2, 0.05, 0.1))])
def test_closed_instances_match_closed_form(f, t):
    sol = solve_sorting(f, t)
    for seed in range(5):
        inst = oracle.build_closed_instance(sol, 16, seed)
        rep = oracle.compare(sol, None, inst, oracle.match_dp(inst))
        assert rep.ok()


def test_optimum_dominates_closed_form_and_gap_is_small():
    sol = solve_sorting(Additive.linear(), Product(U01, U01))
    means = {}
    for n in (8, 12, 16, 20):
        gaps = []
        for seed in range(3):
            inst = oracle.instance_from_workers(sol.f, sol.traits.stratified(n, seed))
            rep = oracle.compare(sol, None, inst, oracle.match_dp(inst))
            assert rep.optimal_value >= rep.closed_value - 1e-12
            gaps.append(rep.surplus_gap)
        means[n] = float(np.mean(gaps))
    assert means[20] < 0.01, means


def test_common_rankings_violation_is_flagged():
    t = Product(U01, U01)
    f = Tabulated.from_function(lambda a, b: a + b + 0.5 * (a - b) ** 2, np.linspace(0, 1, 11))
    ref = t.sample(20_000, 0)
    inst = oracle.build_instance(f, t, 16, 0)
    res = oracle.match_dp(inst)
    idx = empirical_index(f, ref, (0.0, 0.5), inst.workers)
    rep = oracle.compare(None, None, inst, res, index=idx)
    assert rep.pam_violations > 0
    assert rep.surplus_gap is None


def test_compare_reports_dual_wage_gap():
    sol = solve_sorting(REF, REF_T)
    sched = WageSchedule(REF, REF_T, sol)
    inst = oracle.build_closed_instance(sol, 12, 1)
    res = oracle.match_dp(inst)
    rep = oracle.compare(sol, sched, inst, res, dual=oracle.dual_payoffs(inst, res))
    assert rep.wage_gap is not None and rep.wage_gap < 0.5


def test_relaxation_duals_are_core_payoffs():
    sol = solve_sorting(REF, REF_T)
    inst = oracle.build_closed_instance(sol, 200, 2)
    rel = oracle.relaxation_duals(REF, inst.workers)
    slack, _ = oracle.core_slack(inst, rel.u_tilde, rel.assignment)
    assert slack >= -1e-9
    # the assignment value counts every pair twice
    assert abs(2 * rel.u_tilde.sum() - rel.value) <= 1e-9 * rel.value


def test_relaxation_wages_near_closed_form():
    f, t = Additive.linear(), Product(U01, U01)
    sol = solve_sorting(f, t)
    X = oracle.build_closed_instance(sol, 400, 3).workers
    rel = oracle.relaxation_duals(f, X)
    assert np.max(np.abs(rel.wage - WageSchedule(f, t, sol).wage(X))) < 0.02


def test_bucket_gap():
    assert oracle.bucket_gap([1.0, 3.0, 5.0], [2.0, 2.0, 5.0], [0, 0, 1]) == 0.0
    assert oracle.bucket_gap([1.0, 3.0], [0.0, 0.0], [0, 1]) == 3.0
