"""Acceptance gate. Each test prints one pass/fail line for its criterion."""
import math
import time
from fractions import Fraction

import numpy as np
from teamsort import metrics, oracle, outsourcing
from teamsort.dist import BinarySkill, LogNormalJoint, Product, Uniform
from teamsort.economy import Additive, Binary, Multiplicative, SBTCShift, apply_sbtc
from teamsort.sorting import solve_sorting, sorting_stats
from teamsort.wages import WageSchedule, payoff_wage_additive, payoff_wage_general

U01 = Uniform(0.0, 1.0)


def reference_binary():
    return Binary(0.0, 2.0, 3.0), BinarySkill(U01, U01)


# 1 -------------------------------------------------------------------------


def test_oracle_equivalence(acceptance):
    with acceptance(1, "oracle equivalence") as out:
        t0 = time.perf_counter()
        summary = []
        for fam, gen in metrics.FAMILIES.items():
            enum_mismatch = viol = 0
            worst_gap = worst_tie = 0.0
            for ss in np.random.SeedSequence(11).spawn(200):
                rng = np.random.default_rng(ss)
                f, traits = gen(rng)
                sol = solve_sorting(f, traits)
                inst = oracle.build_closed_instance(sol, 12, rng)
                dp = oracle.match_dp(inst)
                en = oracle.match_enumerate(inst)
                # distinct optimal matchings can differ by rounding only
                worst_tie = max(worst_tie, abs(dp.total_surplus - en.total_surplus))
                enum_mismatch += not oracle.values_agree(dp.total_surplus, en.total_surplus)
                rep = oracle.compare(sol, None, inst, dp)
                worst_gap = max(worst_gap, rep.surplus_gap)
                viol += rep.pam_violations
            summary.append(f"{fam} gap={worst_gap:.1e} pam={viol} enum_diff={worst_tie:.1e}")
            assert enum_mismatch == 0, fam
            assert worst_gap <= 1e-9, fam
            assert viol == 0, fam
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0
        out["msg"] = "; ".join(summary) + f"; {elapsed:.1f}s"


# 2 -------------------------------------------------------------------------


def test_binary_worked_example(acceptance):
    with acceptance(2, "binary worked example") as out:
        f, traits = reference_binary()
        sol = solve_sorting(f, traits)
        # oracle: (0.5 + y)/(1.5 - y) = 1/2 solves to y = 1/6
        assert abs(sol.ybar - 1 / 6) <= 1e-12
        sched = WageSchedule(f, traits, sol)
        _, w = sched.evaluate(np.array([[1.0, 0.9], [0.0, 0.1]]))
        assert abs(w[0] - 1.375) <= 1e-12 and abs(w[1] - 0.625) <= 1e-12
        assert w[0] + w[1] == f.F_hl
        X = traits.sample(20_000, 5)
        assert sched.budget_error(X) <= 1e-12
        u_marg = sched.payoff(np.array([1.0, 1 / 6]))[0]
        assert abs(u_marg - 1.5) <= 1e-12
        gaps, viol = [], 0
        for child in np.random.SeedSequence(2).spawn(50):
            inst = oracle.build_closed_instance(sol, 12, child)
            rep = oracle.compare(sol, None, inst, oracle.match_dp(inst))
            gaps.append(rep.surplus_gap)
            viol += rep.pam_violations
        assert max(gaps) <= 1e-9 and viol == 0
        out["msg"] = (f"ybar={sol.ybar!r} w=({float(w[0])!r}, {float(w[1])!r}) u(h,1/6)={float(u_marg)!r} "
                      f"oracle gap={max(gaps):.1e}")


# 3 -------------------------------------------------------------------------


def _four_atom_variance(y, w_o, w_n):
    """Exact variance of the wage atoms in rational arithmetic."""
    y = Fraction(y)
    atoms = [(y / 2, Fraction(w_o[0])), (y / 2, Fraction(w_o[1])),
             ((1 - y) / 2, Fraction(w_n[0])), ((1 - y) / 2, Fraction(w_n[1]))]
    mean = sum(p * w for p, w in atoms)
    return float(sum(p * (w - mean) ** 2 for p, w in atoms))


def test_outsourcing_example(acceptance):
    with acceptance(3, "outsourcing example") as out:
        f, traits = reference_binary()
        eq = outsourcing.solve_outsourcing(outsourcing.OutsourcingScenario(f, traits, 0.2, 0.5))
        # oracle: (0.5 + y)/(1.5 - y) = 1 - 0.4/1.7 gives y = 11/30
        assert abs(eq.y_o - 11 / 30) <= 1e-9
        quad = (eq.w_o_h, eq.w_o_l, eq.w_n_h, eq.w_n_l)
        assert np.allclose(quad, (1.65, 0.15, 1.375, 0.625), rtol=0, atol=1e-12)

        f1 = apply_sbtc(f, SBTCShift.binary(0.0, 1.0))
        eq_post = outsourcing.solve_outsourcing(outsourcing.OutsourcingScenario(f1, traits, 0.2, 0.5))
        # oracle: (0.5 + y)/(1.5 - y) = 1 - 0.4/2.7 gives y = 21/50
        assert abs(eq_post.y_o - 0.42) <= 1e-9
        assert abs(eq_post.delta_w_n - 1.25) <= 1e-12
        assert eq_post.c_identity_error() <= 1e-12
        dec = outsourcing.inequality_decomposition(eq_post)
        direct = _four_atom_variance(0.42, (2.65, 0.15), (2.125, 0.875))
        assert abs(dec.var_w - direct) <= 1e-12
        assert abs(dec.var_w - dec.direct_var) <= 1e-12
        out["msg"] = (f"y0={eq.y_o!r} quad={quad} y1={eq_post.y_o!r} dwn={eq_post.delta_w_n!r} "
                      f"VarW={dec.var_w!r} direct={direct!r}")


# 4 -------------------------------------------------------------------------


def test_variance_ordering_suite(acceptance):
    with acceptance(4, "variance ordering suite") as out:
        parts = []
        for fam in ("binary", "additive", "multiplicative"):
            rep = metrics.variance_ordering_suite(fam, n_scenarios=100, seed=2024)
            assert len(rep.rows) == 100
            assert not rep.violations, rep.violations[:1]
            assert not rep.benchmark_order_violations, rep.benchmark_order_violations[:1]
            parts.append(f"{fam}: 0/100 violations, {len(rep.reversals)} reversals")
        f, traits, alpha_l = metrics.reversal_fixture()
        fx = metrics.population_report(f, traits, n=10_000, seed=1, alpha_l=alpha_l).exact
        assert fx["var_w_star"] > fx["var_w_B"]
        parts.append(f"fixture Var(w*)={fx['var_w_star']!r} > Var(w_B)={fx['var_w_B']!r}")
        out["msg"] = "; ".join(parts)


# 5 -------------------------------------------------------------------------


def _supermodular_cases():
    U = Uniform
    yield "binary {0,1,3}", Binary(0.0, 1.0, 3.0), BinarySkill(U01, U01)
    yield "binary {0,1,4} skewed", Binary(0.0, 1.0, 4.0), BinarySkill(U(0.2, 1.5), U(0.0, 0.7))
    yield "additive linear", Additive.linear(), Product(U01, U01)
    yield "additive power", Additive.power(1.0, 2.0), Product(U(0.5, 2.0), U(0.0, 2.0))
    yield "multiplicative c=1", Multiplicative(1.0, 1.0), LogNormalJoint(0.0, 1.0, 0.2, 0.05, 0.1)
    yield "multiplicative c=0.5", Multiplicative(2.0, 0.5), LogNormalJoint(0.3, 1.5, 0.1, -0.02, 0.2)


def _submodular_cases():
    U = Uniform
    yield "binary {0,2,3}", Binary(0.0, 2.0, 3.0), BinarySkill(U01, U01)
    yield "binary {0,2,3.5} skewed", Binary(0.0, 2.0, 3.5), BinarySkill(U(0.1, 1.2), U(0.0, 0.8))
    yield "binary {0,1.5,2.5}", Binary(0.0, 1.5, 2.5), BinarySkill(U(0.0, 2.0), U(0.5, 1.0))
    yield "multiplicative c=-0.5", Multiplicative(1.0, -0.5), LogNormalJoint(0.0, 1.0, 0.2, 0.05, 0.1)


def test_welfare_gain_share(acceptance):
    with acceptance(5, "welfare gain share") as out:
        parts = []
        for name, f, traits in _supermodular_cases():
            rep = metrics.population_report(f, traits, n=100_000, seed=7)
            losers = round((1.0 - rep.welfare_gain_share) * rep.n)
            assert losers == 0, (name, losers)
            parts.append(f"{name}=1")
        for name, f, traits in _submodular_cases():
            sol = solve_sorting(f, traits)
            # binary cases must have an interior cutoff; the log-normal case never self-matches
            assert 0.0 < getattr(sol, "ybar", 0.5) < 1.0, name
            rep = metrics.population_report(f, traits, sol, n=100_000, seed=7)
            se = rep.se["welfare_gain_share"]
            assert rep.welfare_gain_share + 3 * se < 1.0, name
            parts.append(f"{name}={rep.welfare_gain_share:.4f}")
        out["msg"] = ", ".join(parts)


# 6 -------------------------------------------------------------------------


def test_sbtc_sweeps(acceptance):
    with acceptance(6, "SBTC sweeps") as out:
        conditional = 0
        for ss in np.random.SeedSequence(6).spawn(20):
            rng = np.random.default_rng(ss)
            scn, shift = outsourcing.random_outsourcing_scenario(rng)
            res = outsourcing.sbtc_sweep(scn, shift, steps=21)
            assert len(res.rows) == 21
            assert res.diagnostics["var_w_nondecreasing"]
            assert res.diagnostics["y_o_nondecreasing"]
            assert res.diagnostics["s_F_drift"] <= 1e-12
            if outsourcing.check_share_condition(scn.traits.G_l).passed:
                conditional += 1
                assert res.diagnostics["bfwi_share_nondecreasing"]
        # tight low-skill marginals make the condition bind; check those too
        tight = 0
        for ss in np.random.SeedSequence(66).spawn(20):
            rng = np.random.default_rng(ss)
            lo = rng.uniform(1.0, 3.0)
            G_l = Uniform(lo, lo * rng.uniform(1.05, 1.5))
            F_hl = rng.uniform(1.0, 3.0)
            f = Binary(0.0, F_hl, rng.uniform(1.05, 1.95) * F_hl)
            traits = BinarySkill(G_l, Uniform(0.0, rng.uniform(0.5, 3.0)))
            scn = outsourcing.OutsourcingScenario(f, traits, rng.uniform(0.05, 0.9) * f.s_F,
                                                  rng.uniform(0.0, 1.0))
            assert outsourcing.check_share_condition(G_l).passed
            res = outsourcing.sbtc_sweep(scn, SBTCShift.binary(0.0, rng.uniform(0.1, 1.5)))
            assert res.diagnostics["var_w_nondecreasing"]
            assert res.diagnostics["y_o_nondecreasing"]
            assert res.diagnostics["bfwi_share_nondecreasing"]
            tight += 1
        out["msg"] = (f"20/20 random sweeps monotone ({conditional} meet the share condition); "
                      f"{tight}/20 condition-passing sweeps with monotone BFWI share")


# 7 -------------------------------------------------------------------------


def _dual_gap(f, traits, seed):
    sol = solve_sorting(f, traits)
    sched = WageSchedule(f, traits, sol)
    X = oracle.build_closed_instance(sol, 2000, seed).workers
    rel = oracle.relaxation_duals(f, X)
    return float(np.max(np.abs(rel.wage - sched.wage(X))))


def test_numerical_cross_checks(acceptance):
    with acceptance(7, "numerical cross-checks") as out:
        f, traits = Additive.linear(), Product(U01, U01)
        sol = solve_sorting(f, traits)
        sched = WageSchedule(f, traits, sol)
        g = np.linspace(0.0, 1.0, 10)
        gap_add = 0.0
        for x1 in g:
            for x2 in g:
                ug, wg = payoff_wage_general(f, traits, sol, x1, x2)
                uc, wc = payoff_wage_additive(f, traits, x1, x2, sol)
                ut, wt = sched.evaluate(np.array([x1, x2]))
                gap_add = max(gap_add, abs(ug - uc), abs(wg - wc), abs(ug - ut[0]), abs(wg - wt[0]))
        assert gap_add < 1e-8

        fb, tb = reference_binary()
        solb = solve_sorting(fb, tb)
        schedb = WageSchedule(fb, tb, solb)
        gap_bin = 0.0
        for x1 in (0.0, 1.0):
            for x2 in np.linspace(0.0, 1.0, 50):
                ug, wg = payoff_wage_general(fb, tb, solb, x1, x2)
                uc, wc = schedb.evaluate(np.array([x1, x2]))
                gap_bin = max(gap_bin, abs(ug - uc[0]), abs(wg - wc[0]))
        assert gap_bin < 1e-8

        w00 = sched.wage(np.array([0.0, 0.0]))[0]
        assert abs(w00 - (0.5 - math.log(3) / 4)) <= 1e-10

        duals = {
            "binary": _dual_gap(fb, tb, 71),
            "additive": _dual_gap(f, traits, 72),
            "multiplicative": _dual_gap(Multiplicative(1.0, 1.0),
                                        LogNormalJoint(0.0, 1.0, 0.2, 0.05, 0.1), 73),
        }
        assert max(duals.values()) < 1e-2, duals
        out["msg"] = (f"additive quad gap={gap_add:.1e}, binary quad gap={gap_bin:.1e}, "
                      f"w(0,0) err={abs(w00 - (0.5 - math.log(3) / 4)):.1e}, dual gaps "
                      + ", ".join(f"{k}={v:.1e}" for k, v in duals.items()))


# 8 -------------------------------------------------------------------------


def test_involution_and_feasibility(acceptance):
    cases = {
        "binary": reference_binary(),
        "additive": (Additive.linear(), Product(U01, Uniform(0.0, 2.0))),
        "multiplicative": (Multiplicative(1.0, 1.0), LogNormalJoint(0.0, 0.0, 1.0, 0.0, 1.0)),
    }
    with acceptance(8, "involution and feasibility") as out:
        parts = []
        for k, (cls, (f, traits)) in enumerate(cases.items()):
            sol = solve_sorting(f, traits)
            X = traits.sample(10_000, 81 + k)
            err = sol.involution_error(X)
            assert err < 1e-9, cls
            st = sorting_stats(sol, X, traits.sample(10_000, 91 + k))
            assert st.feasible, cls
            parts.append(f"{cls} inv={err:.1e} KS={st.feasibility_ks:.4f}<{st.ks_critical:.4f}")
        out["msg"] = "; ".join(parts)
