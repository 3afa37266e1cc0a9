"""Operating base points with fixed DNE limits.

Minimizes the sample-averaged dispatch cost subject to base-case
feasibility and robust corrective feasibility for every VRG output within
the given limits.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import formulation as fm
from .model import PowerSystem, ShiftFactorMatrix
from .robust import DEFAULT_EPSILON, CcgTrace, MasterInfeasible, TwoStageProblem, run_ccg
from .sampling import SampleSet
from .solver import LinearProgram, SolveStatus, solve_lp


class ObpInfeasible(RuntimeError):
    """No base point keeps every output within the limits accommodatable."""


@dataclass
class CorrectiveDispatch:
    outputs: np.ndarray  # per CCU, in system.ccu order
    cost: float
    slack_used: float
    status: SolveStatus = SolveStatus.OPTIMAL


def corrective_cost(
    system: PowerSystem,
    sf: ShiftFactorMatrix,
    base_obp,
    realized_vrg,
    penalty: float | str | None = "default",
) -> CorrectiveDispatch:
    """Cheapest corrective redispatch of CCUs around ``base_obp``.

    ``penalty`` is a $/MWh slack price for balance and line rows,
    ``"default"`` for ten times the largest marginal cost, or ``None`` /
    ``"strict"`` for hard rows.  In strict mode an unaccommodatable point
    yields ``status = Infeasible`` and ``cost = inf``.  The cost includes the
    NCCU terms at their base points.
    """
    if penalty == "default":
        penalty = fm.default_penalty(system)
    elif penalty == "strict":
        penalty = None
    base = np.asarray(base_obp, dtype=float)
    lp = LinearProgram("corrective")
    block = fm.add_corrective_block(lp, system, sf, list(base), realized_vrg, "rt", penalty=penalty)
    lp.set_objective(block["objective"], "min", block["constant"])
    sol = solve_lp(lp)
    ccu = system.ccu
    if not sol.optimal:
        return CorrectiveDispatch(base[ccu].copy(), float("inf"), float("nan"), sol.status)
    nccu_cost = sum(system.conventional_units[i].cost_at(base[i]) for i in system.nccu)
    slack = float(sum(sol.values[s] for s in block["slacks"]))
    outputs = np.array([sol.values[block["p_c"][i]] for i in ccu])
    return CorrectiveDispatch(outputs, sol.objective + nccu_cost, slack)


@dataclass
class ObpModel:
    lp: LinearProgram
    l: list[int]
    u: list[int]
    w: list[int]
    p_b: list[int]
    p_c: list[dict[int, int]]
    slacks: list[list[int]]
    realized: np.ndarray

    def two_stage(self, system: PowerSystem, sf: ShiftFactorMatrix) -> TwoStageProblem:
        return fm.robust_dispatch_problem(self.lp, system, sf, self.l, self.u, self.p_b)


@dataclass
class ObpConfig:
    epsilon: float = DEFAULT_EPSILON
    penalty: float | str | None = "default"
    max_ccg_iter: int | None = None
    initial_scenarios: tuple = ()
    backend: str | None = None


@dataclass
class ObpDecision:
    base_obp: np.ndarray
    base_vrg: np.ndarray
    corrective: np.ndarray  # (n_samples, n_ccu)
    expected_cost: float
    per_sample_costs: np.ndarray
    ccg_iterations: int
    trace: CcgTrace | None = None
    solve_seconds: float = 0.0
    objective: float = float("nan")

    def to_record(self) -> dict:
        return {
            "base_obp": [float(x) for x in self.base_obp],
            "base_vrg": [float(x) for x in self.base_vrg],
            "expected_cost": float(self.expected_cost),
            "per_sample_costs": [float(x) for x in self.per_sample_costs],
            "ccg_iterations": self.ccg_iterations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2)


def sample_injections(samples: SampleSet, forecast, upper, capacities) -> np.ndarray:
    """Realized VRG injections per sample, curtailed at the upper DNE limit."""
    realized = np.asarray(forecast, dtype=float)[None, :] + samples.errors
    realized = np.clip(realized, 0.0, np.asarray(capacities, dtype=float))
    return np.minimum(realized, np.asarray(upper, dtype=float)[None, :])


def build_obp2(
    system: PowerSystem,
    sf: ShiftFactorMatrix,
    samples: SampleSet,
    forecast,
    lower,
    upper,
    penalty: float | str | None = "default",
) -> ObpModel:
    """SAA master for the base-point problem (robust rows are left to C&CG)."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    cap = system.vrg_capacity
    if np.any(lower < -1e-9) or np.any(lower > upper + 1e-9) or np.any(upper > cap + 1e-9):
        raise ValueError("limits violate 0 <= l <= u <= W_max")
    if penalty == "default":
        penalty = fm.default_penalty(system)
    elif penalty == "strict":
        penalty = None
    lp = LinearProgram("obp2")
    l, u = fm.add_limits(lp, system, fixed=(np.clip(lower, 0, cap), np.clip(np.maximum(upper, lower), 0, cap)))
    p_b, w = fm.add_base_case(lp, system, sf, forecast)
    obj: dict[int, float] = {}
    const = 0.0
    for i in system.nccu:
        cobj, cconst = fm.add_cost(lp, system, i, p_b[i], "base")
        fm.merge(obj, cobj)
        const += cconst
    realized = sample_injections(samples, forecast, upper, cap)
    n = len(samples)
    p_c, slacks = [], []
    for k in range(n):
        block = fm.add_corrective_block(lp, system, sf, p_b, realized[k], f"k{k}", penalty=penalty)
        fm.merge(obj, block["objective"], 1.0 / n)
        const += block["constant"] / n
        p_c.append(block["p_c"])
        slacks.append(block["slacks"])
    lp.set_objective(obj, "min", const)
    return ObpModel(lp, l, u, w, p_b, p_c, slacks, realized)


def solve_obp(
    system: PowerSystem,
    sf: ShiftFactorMatrix,
    samples: SampleSet,
    forecast,
    lower,
    upper,
    config: ObpConfig | None = None,
) -> ObpDecision:
    """Robust, expected-cost-minimizing base points for fixed limits."""
    config = config or ObpConfig()
    start = time.perf_counter()
    model = build_obp2(system, sf, samples, forecast, lower, upper, config.penalty)
    problem = model.two_stage(system, sf)
    try:
        sol, trace = run_ccg(
            problem,
            config.epsilon,
            config.max_ccg_iter,
            initial_scenarios=config.initial_scenarios,
            backend=config.backend,
        )
    except MasterInfeasible as exc:
        msg = "no robust base point exists for the given limits"
        if config.penalty in ("strict", None):
            msg += " (or some sample cannot be balanced without slack)"
        raise ObpInfeasible(msg) from exc
    x = sol.values
    p_b = x[model.p_b].copy()
    ccu = system.ccu
    corrective = np.array([[x[model.p_c[k][i]] for i in ccu] for k in range(len(samples))]).reshape(len(samples), len(ccu))
    per_sample = np.array(
        [corrective_cost(system, sf, p_b, model.realized[k], config.penalty).cost for k in range(len(samples))]
    )
    return ObpDecision(
        base_obp=p_b,
        base_vrg=x[model.w].copy(),
        corrective=corrective,
        expected_cost=float(per_sample.mean()),
        per_sample_costs=per_sample,
        ccg_iterations=len(trace.iterations),
        trace=trace,
        solve_seconds=time.perf_counter() - start,
        objective=sol.objective,
    )
