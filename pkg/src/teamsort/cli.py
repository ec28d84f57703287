"""Command line: teamsort {solve,verify,sweep,report} --scenario FILE.

Exit codes: 0 ok, 1 verification failed, 2 config error, 3 unsupported case,
4 numerical failure. Output goes to --out, else $TEAMSORT_OUT, else ./out.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import Scenario, load_scenario
from .economy import Binary, Multiplicative, Tabulated
from .errors import ConfigError, InputError, NumericalError, UnsupportedCaseError
from .metrics import population_report
from .oracle import (ENUM_MAX, build_closed_instance, compare, match_dp, match_enumerate,
                     values_agree)
from .outsourcing import SWEEP_COLUMNS, OutsourcingScenario, sbtc_sweep
from .sorting import solve_sorting, sorting_stats, verify_common_rankings
from .wages import WageSchedule

OUT_ENV = "TEAMSORT_OUT"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNSUPPORTED, EXIT_NUMERIC = 0, 1, 2, 3, 4
GAP_TOL = 1e-9


# --------------------------------------------------------------------------
# output helpers


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    write_atomic(path, buf.getvalue())


def write_json(path: Path, obj) -> None:
    write_atomic(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _manifest(cmd: str, scn: Scenario, seed: int, n, files: list[str], extra: dict | None = None):
    m = {"command": cmd, "scenario": scn.raw, "scenario_name": scn.name,
         "seed": seed, "n": n, "files": sorted(files),
         "versions": {"teamsort": __version__, "numpy": np.__version__, "scipy": scipy.__version__}}
    if extra:
        m.update(extra)
    return m


# --------------------------------------------------------------------------
# worker grids


def _axis(marginal, size: int, floor: float = -np.inf) -> np.ndarray:
    """Quantile grid; ends move inward when the support is unbounded or open at `floor`."""
    lo, hi = marginal.support()
    p = np.linspace(0.0, 1.0, size)
    if not np.isfinite(lo) or lo <= floor:
        p[0] = 1e-3
    if not np.isfinite(hi):
        p[-1] = 1 - 1e-3
    return np.asarray(marginal.ppf(p), dtype=float)


def worker_grid(scn: Scenario) -> np.ndarray:
    f, tr, k = scn.f, scn.traits, scn.analysis.grid
    if isinstance(f, Binary):
        rows = [(x1, s) for x1, G in ((f.l, tr.G_l), (f.h, tr.G_h)) for s in _axis(G, k, -0.5)]
        return np.array(rows, dtype=float)
    a = _axis(tr.marginal(1), k, 0.0 if isinstance(f, Multiplicative) else -np.inf)
    b = _axis(tr.marginal(2), k, -0.5)
    A, B = np.meshgrid(a, b, indexing="ij")
    return np.column_stack([A.ravel(), B.ravel()])


def _binary_types(f: Binary, tr, sol, sched) -> list[dict]:
    y = sol.ybar
    out = []
    for name, x1, G, r_cross, r_self in (("h", f.h, tr.G_h, 0.5 * (1 + y), 0.5 * y),
                                         ("l", f.l, tr.G_l, 0.5 * (1 - y), 1 - 0.5 * y)):
        for kind, r, mass in (("cross", r_cross, (1 - y) / 2), ("self", r_self, y / 2)):
            if mass <= 0:
                continue
            x = np.array([[x1, float(G.ppf(r))]])
            w = float(sched.wage(x)[0])
            F_mate = f.F_hl if kind == "cross" else (f.F_hh if name == "h" else f.F_ll)
            # payoff is affine in x2 for a fixed wage pair
            u0 = w
            u1 = w + (2 * w - F_mate)
            out.append({"type": f"{name}_{kind}", "x1": x1, "mass": mass, "w": w,
                        "u_x2_0": u0, "u_x2_1": u1})
    return out


# --------------------------------------------------------------------------
# commands


def cmd_solve(scn: Scenario, out: Path, seed: int, n: int, jobs: int) -> int:
    f, tr = scn.f, scn.traits
    sol = solve_sorting(f, tr)
    sched = WageSchedule(f, tr, sol, scn.analysis.alpha_l)
    summary = [{"key": "class", "value": sol.kind}]
    for attr in ("regime", "ybar", "r", "k", "var_index"):
        if hasattr(sol, attr):
            summary.append({"key": attr, "value": getattr(sol, attr)})
    files = ["summary.csv", "wages.csv", "stats.csv"]
    write_csv(out / "summary.csv", ["key", "value"], summary)

    X = worker_grid(scn)
    u, w = sched.evaluate(X)
    M = sol.partner(X)
    rows = [{"x1": X[i, 0], "x2": X[i, 1], "v1": v, "partner_x1": M[i, 0], "partner_x2": M[i, 1],
             "self_match": s, "u": u[i], "w": w[i], "w_B": b}
            for i, (v, s, b) in enumerate(zip(sol.v1(X), sol.is_selfmatch(X), sched.benchmark(X[:, 0])))]
    write_csv(out / "wages.csv", ["x1", "x2", "v1", "partner_x1", "partner_x2", "self_match",
                                  "u", "w", "w_B"], rows)
    if isinstance(f, Binary):
        write_csv(out / "types.csv", ["type", "x1", "mass", "w", "u_x2_0", "u_x2_1"],
                  _binary_types(f, tr, sol, sched))
        files.append("types.csv")

    ss = np.random.SeedSequence(seed).spawn(2)
    st = sorting_stats(sol, tr.sample(n, ss[0]), tr.sample(n, ss[1]))
    write_csv(out / "stats.csv", ["corr_skill", "self_match_frac", "feasibility_ks", "ks_critical",
                                  "feasible"],
              [{"corr_skill": st.corr_skill, "self_match_frac": st.self_match_frac,
                "feasibility_ks": st.feasibility_ks, "ks_critical": st.ks_critical,
                "feasible": st.feasible}])
    write_json(out / "manifest.json", _manifest("solve", scn, seed, n, files + ["manifest.json"],
                                                {"budget_error": sched.budget_error(X)}))
    return EXIT_OK


def _default_skill_pairs(scn: Scenario):
    if scn.analysis.skill_pairs is not None:
        return list(scn.analysis.skill_pairs)
    f = scn.f
    if isinstance(f, Binary):
        return None
    if isinstance(f, Tabulated):
        g = f.grid
        q = [g[0], g[len(g) // 2], g[-1]]
    else:
        q = list(np.asarray(scn.traits.marginal(1).ppf([0.1, 0.5, 0.9]), dtype=float))
    return [(q[0], q[1]), (q[1], q[2]), (q[0], q[2])]


def _verify_one(args) -> dict:
    raw_path, n, seed_state = args
    scn = load_scenario(raw_path)
    sol = solve_sorting(scn.f, scn.traits)
    seed = np.random.SeedSequence(**seed_state)
    inst = build_closed_instance(sol, n, seed)
    res = match_dp(inst)
    rep = compare(sol, None, inst, res)
    enum_ok = None
    if n <= ENUM_MAX:
        enum_ok = values_agree(match_enumerate(inst).total_surplus, res.total_surplus)
    ok = rep.ok(GAP_TOL) and enum_ok is not False
    return {"n": n, "seed": seed_state["spawn_key"][-1], "optimal": rep.optimal_value,
            "closed_form": rep.closed_value, "surplus_gap": rep.surplus_gap,
            "pam_violations": rep.pam_violations, "enumeration_agrees": enum_ok, "ok": ok}


def cmd_verify(scn: Scenario, out: Path, seed: int, n: int | None, jobs: int) -> int:
    sizes = [n] if n is not None else list(scn.analysis.oracle_sizes)
    for s in sizes:
        if s % 2 or s < 2:
            raise InputError(f"oracle size must be even and >= 2, got {s}")
    report: dict = {"common_rankings": None, "instances": []}
    failed = False

    pairs = _default_skill_pairs(scn)
    if pairs is not None and len(pairs) >= 2:
        a1 = verify_common_rankings(scn.f, scn.traits, pairs, n=min(scn.analysis.n, 50_000), seed=seed)
        report["common_rankings"] = {"max_discrepancy": a1.max_discrepancy, "tolerance": a1.tolerance,
                                 "per_pair": list(a1.per_pair), "passed": a1.passed,
                                 "skill_pairs": [list(p) for p in pairs]}
        failed |= not a1.passed
    try:
        solve_sorting(scn.f, scn.traits)
        closed = True
    except UnsupportedCaseError as e:
        if pairs is None or report["common_rankings"] is None:
            raise
        closed = False
        report["closed_form"] = f"unavailable: {e}"

    rows = []
    if closed:
        tasks = []
        for s in sizes:
            for child in np.random.SeedSequence(seed).spawn(scn.analysis.oracle_seeds):
                tasks.append((scn.source, s, {"entropy": child.entropy, "spawn_key": child.spawn_key}))
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                rows = list(ex.map(_verify_one, tasks))
        else:
            rows = [_verify_one(t) for t in tasks]
        failed |= not all(r["ok"] for r in rows)
        report["instances"] = rows
        report["max_surplus_gap"] = max(r["surplus_gap"] for r in rows)
        report["total_pam_violations"] = sum(r["pam_violations"] for r in rows)
    report["passed"] = not failed
    write_csv(out / "verify.csv", ["n", "seed", "optimal", "closed_form", "surplus_gap",
                                   "pam_violations", "enumeration_agrees", "ok"], rows)
    write_json(out / "verify.json", report)
    write_json(out / "manifest.json", _manifest("verify", scn, seed, sizes,
                                                ["verify.csv", "verify.json", "manifest.json"]))
    if failed:
        print("verification failed; see verify.json", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_sweep(scn: Scenario, out: Path, seed: int, n: int, jobs: int) -> int:
    a = scn.analysis
    if not isinstance(scn.f, Binary):
        raise UnsupportedCaseError("sweeps need binary production")
    if a.outsourcing_cost is None or scn.sbtc is None:
        raise ConfigError("sweep needs analysis.outsourcing_cost and analysis.sbtc", "analysis",
                          None, scn.source)
    res = sbtc_sweep(OutsourcingScenario(scn.f, scn.traits, a.outsourcing_cost, a.alpha_l),
                     scn.sbtc, a.sweep_steps)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS + ["bfwi_share"], res.rows)
    write_json(out / "manifest.json", _manifest("sweep", scn, seed, None,
                                                ["sweep.csv", "manifest.json"],
                                                {"diagnostics": res.diagnostics}))
    return EXIT_OK


def cmd_report(scn: Scenario, out: Path, seed: int, n: int, jobs: int) -> int:
    rep = population_report(scn.f, scn.traits, n=n, seed=seed, alpha_l=scn.analysis.alpha_l)
    d = rep.as_dict()
    d["identity_error"] = rep.identity_error()
    write_csv(out / "report.csv", list(d), [d])
    write_json(out / "report.json", d)
    write_json(out / "manifest.json", _manifest("report", scn, seed, n,
                                                ["report.csv", "report.json", "manifest.json"]))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="teamsort", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="YAML scenario file")
        p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./out)")
        p.add_argument("--seed", type=int, default=None, help="override analysis.seed")
        p.add_argument("--n", type=int, default=None,
                       help="Monte Carlo size, or the oracle instance size for verify")
        p.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scn = load_scenario(args.scenario)
        seed = scn.analysis.seed if args.seed is None else args.seed
        if seed < 0:
            raise InputError("seed must be >= 0")
        if args.jobs < 1:
            raise InputError("--jobs must be >= 1")
        out = Path(args.out or os.environ.get(OUT_ENV) or "out")
        if args.command == "verify":
            n = args.n
        else:
            n = scn.analysis.n if args.n is None else args.n
            if n < 2 or n % 2:
                raise InputError(f"--n must be even and >= 2, got {n}")
        return COMMANDS[args.command](scn, out, seed, n, args.jobs)
    except UnsupportedCaseError as e:
        print(f"unsupported: {e}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except InputError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
