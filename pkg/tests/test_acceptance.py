"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` (about ten minutes
on one core).  The summary lines also appear at the end of a normal run.
"""
import time

import numpy as np
import pytest

from dnedispatch import baseline, obp, robust, solver
from dnedispatch.baseline import solve_ed, solve_odne
from dnedispatch.dne import DneConfig, build_dne2, build_dne3, solve_dne
from dnedispatch.model import compute_shift_factors, load_bundled_case
from dnedispatch.obp import corrective_cost, solve_obp
from dnedispatch.robust import enumerate_subproblem, solve_subproblem
from dnedispatch.sampling import History, select_samples
from dnedispatch.sim import SimulationConfig, run_simulation
from dnedispatch.solver import brute_force_milp, dual_objective, solve_milp
from dnedispatch.synthetic import generate_wind

from instances import (
    fixed_two_stage,
    random_dne_instance,
    random_lp_for_duality,
    random_milp,
    random_two_stage,
    with_all_vertices,
    z_only,
)

EPS = 1e-4


def theta_at(system, sf, lower, upper, p_b):
    problem, x = fixed_two_stage(system, sf, lower, upper, p_b)
    return enumerate_subproblem(problem, x)[0]


# ---------------------------------------------------------------------------
# shared paired run on the 6-bus replica (criteria 5 and 10)
# ---------------------------------------------------------------------------
PAIRED_PERIODS = 120


@pytest.fixture(scope="module")
def paired_run():
    system = load_bundled_case("six_bus")
    # generator defaults, as the CLI writes them
    history, validation = generate_wind(system.vrg_capacity, 8760, 240, seed=2024)
    start = time.perf_counter()
    reports = {}
    for method in ("proposed", "odne"):
        config = SimulationConfig(method=method, n_dne=100, n_obp=20, horizon=list(range(PAIRED_PERIODS)))
        reports[method] = run_simulation(system, history, validation, config)
    return reports, time.perf_counter() - start


# ---------------------------------------------------------------------------
def test_criterion_01_extended_formulation_equivalence(report_criterion):
    start = time.perf_counter()
    mismatches, values = [], []
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        system, sf, s, f = random_dne_instance(rng, n_vrg=int(rng.integers(1, 3)), n_samples=int(rng.integers(5, 9)))
        m2 = build_dne2(system, sf, s, f, tiebreak=0.0)
        m3 = build_dne3(system, sf, s, f, k=len(s), tiebreak=0.0)
        a = brute_force_milp(with_all_vertices(m2, system, sf)).objective
        b = brute_force_milp(z_only(with_all_vertices(m3, system, sf), m3.z)).objective
        values.append(a)
        if not (a == b and a == round(a)):
            mismatches.append((seed, a, b))
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 60.0
    report_criterion(1, ok, f"20 instances, DNE-2 == DNE-3 objectives {sorted(set(values))}, mismatches {mismatches}, {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_02_robust_certification(report_criterion):
    worst, count = 0.0, 0
    cases = []
    for seed in range(8):
        rng = np.random.default_rng(2000 + seed)
        cases.append(random_dne_instance(rng, n_vrg=1 + seed % 6, n_samples=20))
    six = load_bundled_case("six_bus")
    hist, val = generate_wind(six.vrg_capacity, 2000, 3, seed=7)
    for rec in val:
        s = select_samples(hist, rec.forecast, 100, six.vrg_capacity)
        cases.append((six, compute_shift_factors(six), s, rec.forecast))
    for system, sf, s, f in cases:
        dne = solve_dne(system, sf, s, f)
        worst = max(worst, theta_at(system, sf, dne.lower, dne.upper, dne.base_obp))
        ob = solve_obp(system, sf, s, f, dne.lower, dne.upper)
        worst = max(worst, theta_at(system, sf, dne.lower, dne.upper, ob.base_obp))
        count += 2
    ok = worst < EPS
    report_criterion(2, ok, f"{count} DNE/OBP decisions (|VRG| 1..6), max enumerated theta {worst:.2e} MW (< 1e-4)")
    assert ok


def test_criterion_03_subproblem_dualization(report_criterion):
    start = time.perf_counter()
    worst_gap = 0.0
    positive = 0
    for seed in range(50):
        rng = np.random.default_rng(3000 + seed)
        problem, x = random_two_stage(rng, 1 + seed % 6)
        a, _ = solve_subproblem(problem, x)
        b, _ = enumerate_subproblem(problem, x)
        worst_gap = max(worst_gap, abs(a - b))
        positive += b > 1e-9
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-6 and elapsed < 120.0
    report_criterion(3, ok, f"50 instances (n 1..6, {positive} with theta > 0), max |dual MILP - enumeration| {worst_gap:.2e}, {elapsed:.1f}s (< 120s)")
    assert ok


def test_criterion_04_ccg_contract(report_criterion):
    problems = []
    for seed in range(10):
        rng = np.random.default_rng(4000 + seed)
        system, sf, s, f = random_dne_instance(rng, n_vrg=1 + seed % 4, n_samples=15)
        dne = solve_dne(system, sf, s, f)
        problems.append(("min", system.n_vrg, dne.trace, (system, sf, dne.lower, dne.upper, dne.base_obp)))
        ob = solve_obp(system, sf, s, f, dne.lower, dne.upper)
        problems.append(("min", system.n_vrg, ob.trace, (system, sf, dne.lower, dne.upper, ob.base_obp)))
        ed = solve_ed(system, sf, f)
        od = solve_odne(system, sf, ed)
        problems.append(("max", system.n_vrg, od.trace, (system, sf, od.lower, od.upper, ed.obp)))
    monotone = bound = verified = True
    worst = 0.0
    for sense, n, trace, args in problems:
        objs = [it["master_obj"] for it in trace.iterations]
        step = np.diff(objs) if sense == "min" else -np.diff(objs)
        monotone &= bool(np.all(step >= -1e-7))
        # rounds that added a scenario; the last round only certifies
        bound &= len(trace.iterations) - 1 <= 2**n
        theta = theta_at(*args)
        worst = max(worst, theta)
        verified &= trace.converged and theta < EPS
    ok = monotone and bound and verified
    report_criterion(
        4,
        ok,
        f"{len(problems)} C&CG runs: master monotone {monotone}, scenario rounds <= 2^n {bound}, re-verified theta max {worst:.2e}",
    )
    assert ok


def test_criterion_05_in_sample_dominance(report_criterion, paired_run):
    reports, elapsed = paired_run
    prop, base = reports["proposed"], reports["odne"]
    pairs = [(a.in_sample_covered, b.in_sample_covered) for a, b in zip(prop.per_period, base.per_period)]
    dominance = all(a >= b for a, b in pairs)
    margin = prop.coverage_rate - base.coverage_rate
    ok = len(pairs) >= 100 and dominance and margin >= 0.10 and elapsed < 900.0
    report_criterion(
        5,
        ok,
        f"{len(pairs)} periods: in-sample dominance {dominance} (mean {np.mean([a for a, _ in pairs]):.1f} vs "
        f"{np.mean([b for _, b in pairs]):.1f} of 100); out-of-sample coverage {prop.coverage_rate:.3f} vs "
        f"{base.coverage_rate:.3f} (margin {100 * margin:.1f} pp >= 10); {elapsed:.0f}s (< 900s)",
    )
    assert ok


def test_criterion_06_sample_selection(report_criterion):
    import math

    rng = np.random.default_rng(6000)
    mismatches = 0
    queries = 0
    for trial in range(5):
        n_vrg = 1 + trial % 3
        forecasts = np.round(rng.uniform(0, 40, (1000, n_vrg)), 0 if trial % 2 else 2)
        records = [
            solver_free_record(t, f, e) for t, (f, e) in enumerate(zip(forecasts, rng.normal(size=(1000, n_vrg))))
        ]
        hist = History(records)
        for n in (1, 17, 400, 999, 1000, 1500):
            target = np.round(rng.uniform(0, 40, n_vrg), 1)
            got = list(select_samples(hist, target, n).indices)
            key = lambda r: (math.sqrt(sum((a - b) ** 2 for a, b in zip(r.forecast, target))), r.timestamp)
            want = [r.timestamp for r in sorted(records, key=key)[: min(n, len(records))]]
            mismatches += got != want
            queries += 1
    ok = mismatches == 0
    report_criterion(6, ok, f"{queries} queries on 1000-record histories (n up to 1500), mismatches vs exhaustive sort {mismatches}")
    assert ok


def solver_free_record(t, f, e):
    from dnedispatch.sampling import HistoryRecord

    return HistoryRecord(t, f, e)


def test_criterion_07_k_escalation(report_criterion):
    diffs = []
    escalated = 0
    for seed in range(10):
        rng = np.random.default_rng(7000 + seed)
        system, sf, s, f = random_dne_instance(rng, n_vrg=1 + seed % 3, n_samples=25)
        direct = solve_dne(system, sf, s, f, DneConfig(initial_k=len(s)))
        low = solve_dne(system, sf, s, f, DneConfig(initial_k=1))
        escalated += low.k_used > 1
        obj = lambda d: d.excluded - 1e-6 * float(np.sum(d.upper - d.lower))
        diffs.append((low.excluded - direct.excluded, abs(obj(low) - obj(direct))))
    ok = all(dz == 0 and dobj <= 1e-6 for dz, dobj in diffs)
    report_criterion(
        7, ok, f"10 instances from K = 1 ({escalated} escalated): exclusion differences {[d for d, _ in diffs]}, max objective gap {max(o for _, o in diffs):.1e}"
    )
    assert ok


def test_criterion_08_backend_soundness(report_criterion, monkeypatch):
    recorded = []
    real = solver.solve_lp

    def recording(lp, backend=None, **kw):
        sol = real(lp, backend, **kw)
        if sol.optimal and "lb" not in kw and "ub" not in kw:
            # masters grow after each solve, so take the residual now
            recorded.append(abs(sol.objective - dual_objective(lp, sol)))
        return sol

    for module in (solver, robust, obp, baseline):
        monkeypatch.setattr(module, "solve_lp", recording)
    # LPs built by the package: ED, corrective dispatch, OBP and ODNE masters, subproblem inner LPs
    system = load_bundled_case("six_bus")
    sf = compute_shift_factors(system)
    hist, val = generate_wind(system.vrg_capacity, 1000, 3, seed=8)
    for rec in val:
        s = select_samples(hist, rec.forecast, 15, system.vrg_capacity)
        ed = solve_ed(system, sf, rec.forecast)
        solve_odne(system, sf, ed)
        dne = solve_dne(system, sf, s, rec.forecast)
        ob = solve_obp(system, sf, s, rec.forecast, dne.lower, dne.upper)
        corrective_cost(system, sf, ob.base_obp, rec.observed)
        problem, x = fixed_two_stage(system, sf, dne.lower, dne.upper, ob.base_obp)
        enumerate_subproblem(problem, x)
    for seed in range(100):
        lp = random_lp_for_duality(np.random.default_rng(8000 + seed))
        for backend in ("highs", "native"):
            recording(lp, backend)
    residuals = recorded
    worst_dual = max(residuals)
    monkeypatch.undo()

    start = time.perf_counter()
    mismatch = 0
    for seed in range(200):
        rng = np.random.default_rng(8500 + seed)
        mip = random_milp(rng, 1 + seed % 12, n_cont=2, n_rows=5)
        a = solve_milp(mip, gap_tol=0.0)
        b = brute_force_milp(mip)
        same = a.status is b.status and (not b.optimal or abs(a.objective - b.objective) <= 1e-7)
        mismatch += not same
    elapsed = time.perf_counter() - start
    ok = worst_dual <= 1e-6 and mismatch == 0
    report_criterion(
        8,
        ok,
        f"{len(residuals)} LP solves, max strong-duality residual {worst_dual:.1e} (<= 1e-6); "
        f"200 MILPs (1..12 binaries) vs brute force, mismatches {mismatch} ({elapsed:.0f}s)",
    )
    assert ok


def test_criterion_09_scaling_sanity(report_criterion):
    system = load_bundled_case("six_bus")
    sf = compute_shift_factors(system)
    hist, val = generate_wind(system.vrg_capacity, 8760, 3, seed=9)
    times = {50: 0.0, 200: 0.0}
    for rec in val:
        for n in times:
            s = select_samples(hist, rec.forecast, n, system.vrg_capacity)
            times[n] += solve_dne(system, sf, s, rec.forecast).solve_seconds
    grid = load_bundled_case("twenty_bus")
    ghist, gval = generate_wind(grid.vrg_capacity, 8760, 24, seed=10)
    start = time.perf_counter()
    rep = run_simulation(grid, ghist, gval, SimulationConfig(method="proposed"))
    elapsed = time.perf_counter() - start
    ok = times[200] > times[50] and len(rep.per_period) == 24 and elapsed < 1800.0
    report_criterion(
        9,
        ok,
        f"6-bus DNE time n=200 {times[200]:.2f}s > n=50 {times[50]:.2f}s (3 periods); "
        f"20-bus/4-VRG 24-period run (n_dne=400) {elapsed:.0f}s (< 1800s), failed periods {sum(r.failed for r in rep.per_period)}",
    )
    assert ok


def test_criterion_10_wind_utilization(report_criterion, paired_run):
    reports, _ = paired_run
    a, b = reports["proposed"].total_wind, reports["odne"].total_wind
    ok = a >= b
    report_criterion(10, ok, f"total realized wind over {PAIRED_PERIODS} periods: proposed {a:.1f} MWh vs ODNE {b:.1f} MWh")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-s"]))
