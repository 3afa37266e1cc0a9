"""Dispatchable-range (DNE limit) determination.

Sample-average coverage models with the indicator big-M rows (``build_dne2``)
or the per-unit mixing-set extended formulation (``build_dne3``), solved with
robust corrective-dispatch feasibility enforced by column-and-constraint
generation.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import formulation as fm
from .model import PowerSystem, ShiftFactorMatrix
from .robust import DEFAULT_EPSILON, CcgTrace, MasterInfeasible, TwoStageProblem, run_ccg, solve_subproblem
from .sampling import SampleSet
from .solver import MixedIntegerProgram, write_lp

WIDTH_TIEBREAK = 1e-6


class DneInfeasible(RuntimeError):
    """No DNE limits exist even with every sample excluded."""


@dataclass
class DneModel:
    mip: MixedIntegerProgram
    l: list[int]
    u: list[int]
    w: list[int]
    p_b: list[int]
    z: list[int]
    alpha: list[list[int]] = field(default_factory=list)
    beta: list[list[int]] = field(default_factory=list)
    k: int | None = None

    def two_stage(self, system: PowerSystem, sf: ShiftFactorMatrix) -> TwoStageProblem:
        return fm.robust_dispatch_problem(self.mip, system, sf, self.l, self.u, self.p_b)


@dataclass(frozen=True)
class SortedIndexSequences:
    gamma: np.ndarray  # (n_vrg, n_samples): realized output descending
    phi: np.ndarray  # (n_vrg, n_samples): headroom to capacity descending


@dataclass
class DneConfig:
    epsilon: float = DEFAULT_EPSILON
    initial_k: int | None = None
    formulation: str = "dne3"
    tiebreak: float = WIDTH_TIEBREAK
    gap_tol: float = 1e-6
    max_ccg_iter: int | None = None
    initial_scenarios: tuple = ()
    backend: str | None = None


@dataclass
class DneDecision:
    lower: np.ndarray
    upper: np.ndarray
    base_vrg: np.ndarray
    base_obp: np.ndarray
    indicators: np.ndarray
    coverage_count: int
    k_used: int | None
    ccg_iterations: int
    trace: CcgTrace | None = None
    solve_seconds: float = 0.0

    @property
    def excluded(self) -> int:
        return int(self.indicators.sum())

    def to_record(self) -> dict:
        return {
            "lower": [float(x) for x in self.lower],
            "upper": [float(x) for x in self.upper],
            "base_obp": [float(x) for x in self.base_obp],
            "base_vrg": [float(x) for x in self.base_vrg],
            "coverage_count": int(self.coverage_count),
            "k_used": self.k_used,
            "ccg_iterations": self.ccg_iterations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2)


def _check_inputs(system: PowerSystem, samples: SampleSet, forecast) -> np.ndarray:
    f = np.asarray(forecast, dtype=float)
    cap = system.vrg_capacity
    if f.shape != (system.n_vrg,):
        raise ValueError("forecast length does not match the number of VRG units")
    if np.any(f < -1e-9) or np.any(f > cap + 1e-9):
        raise ValueError("forecast outside [0, capacity]")
    if samples.errors.shape[1:] != (system.n_vrg,):
        raise ValueError("sample dimension does not match the number of VRG units")
    realized = f[None, :] + samples.errors
    if np.any(realized < -1e-9) or np.any(realized > cap + 1e-9):
        raise ValueError("negative big-M constant: sample realized output outside [0, capacity] (clip samples first)")
    return np.clip(realized, 0.0, cap)


def _base_model(system, sf, samples, forecast, name, tiebreak) -> DneModel:
    mip = MixedIntegerProgram(name)
    l, u = fm.add_limits(mip, system)
    p_b, w = fm.add_base_case(mip, system, sf, forecast)
    z = [mip.add_binary(f"z[{k}]") for k in range(len(samples))]
    obj = {zk: 1.0 for zk in z}
    if tiebreak:
        for lj, uj in zip(l, u):
            obj[uj] = obj.get(uj, 0.0) - tiebreak
            obj[lj] = obj.get(lj, 0.0) + tiebreak
    mip.set_objective(obj, "min")
    return DneModel(mip, l, u, w, p_b, z)


def build_dne2(
    system: PowerSystem, sf: ShiftFactorMatrix, samples: SampleSet, forecast, tiebreak: float = WIDTH_TIEBREAK
) -> DneModel:
    """Coverage MILP with one big-M pair per sample and VRG unit."""
    realized = _check_inputs(system, samples, forecast)
    model = _base_model(system, sf, samples, forecast, "dne2", tiebreak)
    cap = system.vrg_capacity
    for k, zk in enumerate(model.z):
        for j, v in enumerate(system.vrg_units):
            r = realized[k, j]
            # z = 0 forces l <= r <= u
            model.mip.add_row({zk: cap[j] - r, model.l[j]: -1.0}, ">=", -r, f"cover_lo[{k},{v.id}]")
            model.mip.add_row({zk: r, model.u[j]: 1.0}, ">=", r, f"cover_up[{k},{v.id}]")
    return model


def sort_sequences(samples: SampleSet, forecast, capacities) -> SortedIndexSequences:
    """Per-unit sample orderings by realized output (gamma) and by headroom
    to capacity (phi), both descending; ties keep the smaller index first."""
    if len(samples) == 0:
        raise ValueError("no samples")
    realized = np.asarray(forecast, dtype=float)[None, :] + samples.errors
    headroom = np.asarray(capacities, dtype=float)[None, :] - realized
    gamma = np.vstack([np.argsort(-realized[:, j], kind="stable") for j in range(realized.shape[1])])
    phi = np.vstack([np.argsort(-headroom[:, j], kind="stable") for j in range(realized.shape[1])])
    return SortedIndexSequences(gamma, phi)


def build_dne3(
    system: PowerSystem,
    sf: ShiftFactorMatrix,
    samples: SampleSet,
    forecast,
    k: int,
    tiebreak: float = WIDTH_TIEBREAK,
) -> DneModel:
    """Coverage MILP with the strong extended (mixing-set) formulation.

    At most ``k`` samples per unit and side may fall outside the limits.
    """
    n = len(samples)
    if not 0 <= k <= n:
        raise ValueError(f"K = {k} outside [0, {n}]")
    realized = _check_inputs(system, samples, forecast)
    f = np.asarray(forecast, dtype=float)
    model = _base_model(system, sf, samples, forecast, "dne3", tiebreak)
    model.k = k
    mip = model.mip
    seq = sort_sequences(samples, f, system.vrg_capacity)
    cap = system.vrg_capacity
    for j, v in enumerate(system.vrg_units):
        # realized output along each ordering, with the sentinel one step
        # past the end: capacity for the lower side, zero for the upper side
        lo_vals = np.append(realized[seq.phi[j], j], cap[j])
        up_vals = np.append(realized[seq.gamma[j], j], 0.0)
        alpha = [mip.add_binary(f"alpha[{v.id},{m}]") for m in range(k)]
        beta = [mip.add_binary(f"beta[{v.id},{m}]") for m in range(k)]
        row = {model.l[j]: -1.0}
        for m, a in enumerate(alpha):
            row[a] = lo_vals[m + 1] - lo_vals[m]
        mip.add_row(row, ">=", -lo_vals[0], f"mix_lo[{v.id}]")
        row = {model.u[j]: 1.0}
        for m, b in enumerate(beta):
            row[b] = up_vals[m] - up_vals[m + 1]
        mip.add_row(row, ">=", up_vals[0], f"mix_up[{v.id}]")
        for m in range(k - 1):
            mip.add_row({alpha[m]: 1.0, alpha[m + 1]: -1.0}, ">=", 0.0, f"chain_a[{v.id},{m}]")
            mip.add_row({beta[m]: 1.0, beta[m + 1]: -1.0}, ">=", 0.0, f"chain_b[{v.id},{m}]")
        for m in range(k):
            mip.add_row({model.z[seq.phi[j, m]]: 1.0, alpha[m]: -1.0}, ">=", 0.0, f"link_a[{v.id},{m}]")
            mip.add_row({model.z[seq.gamma[j, m]]: 1.0, beta[m]: -1.0}, ">=", 0.0, f"link_b[{v.id},{m}]")
        model.alpha.append(alpha)
        model.beta.append(beta)
    return model


def coverage_count(samples: SampleSet, lower, upper, tol: float = 1e-7) -> int:
    """Number of samples whose realized output lies inside ``[lower, upper]``."""
    r = samples.realized
    inside = np.all((r >= np.asarray(lower) - tol) & (r <= np.asarray(upper) + tol), axis=1)
    return int(inside.sum())


class _BudgetExceeded(Exception):
    pass


def initial_k(n_samples: int) -> int:
    return min(n_samples, math.ceil(0.2 * n_samples))


def solve_dne(
    system: PowerSystem,
    sf: ShiftFactorMatrix,
    samples: SampleSet,
    forecast,
    config: DneConfig | None = None,
    emit_lp: list | None = None,
) -> DneDecision:
    """Robust coverage-maximizing DNE limits and co-optimized base points.

    With the extended formulation, ``K`` starts at ``config.initial_k`` and is
    doubled (capped at the sample count) whenever the master becomes
    infeasible or its exclusion count exceeds ``K``; a converged solution with
    at most ``K`` exclusions is globally optimal because every solution that
    needs more than ``K`` exclusions on one side has a larger objective.
    """
    config = config or DneConfig()
    start = time.perf_counter()
    n = len(samples)
    scenarios = [np.asarray(v, dtype=float) for v in config.initial_scenarios]
    total_iters = 0

    def recording_subproblem(problem, x, backend=None):
        theta, worst = solve_subproblem(problem, x, backend=backend)
        if theta >= config.epsilon and not any(np.array_equal(worst, s) for s in scenarios):
            scenarios.append(worst)
        return theta, worst

    k = None
    if config.formulation == "dne3":
        k = initial_k(n) if config.initial_k is None else config.initial_k
    elif config.formulation != "dne2":
        raise ValueError(f"unknown formulation {config.formulation!r}")

    while True:
        if config.formulation == "dne2":
            model = build_dne2(system, sf, samples, forecast, config.tiebreak)
        else:
            model = build_dne3(system, sf, samples, forecast, k, config.tiebreak)
        if emit_lp is not None:
            emit_lp.append(write_lp(model.mip))
        problem = model.two_stage(system, sf)
        z = np.array(model.z)

        def budget_check(sol, k=k):
            if k is not None and k < n and round(float(sol.values[z].sum())) > k:
                raise _BudgetExceeded

        try:
            sol, trace = run_ccg(
                problem,
                config.epsilon,
                config.max_ccg_iter,
                subproblem=recording_subproblem,
                initial_scenarios=list(scenarios),
                master_check=budget_check,
                gap_tol=config.gap_tol,
                backend=config.backend,
            )
            total_iters += len(trace.iterations)
        except (MasterInfeasible, _BudgetExceeded) as exc:
            if isinstance(exc, MasterInfeasible):
                total_iters += len(exc.trace.iterations) + 1
            if k is None or k >= n:
                raise DneInfeasible("no robust DNE limits exist even with all samples excluded") from exc
            k = min(max(1, 2 * k), n)
            continue
        break

    x = sol.values
    indicators = np.round(x[model.z]).astype(int)
    return DneDecision(
        lower=x[model.l].copy(),
        upper=x[model.u].copy(),
        base_vrg=x[model.w].copy(),
        base_obp=x[model.p_b].copy(),
        indicators=indicators,
        coverage_count=int(n - indicators.sum()),
        k_used=k,
        ccg_iterations=total_iters,
        trace=trace,
        solve_seconds=time.perf_counter() - start,
    )
