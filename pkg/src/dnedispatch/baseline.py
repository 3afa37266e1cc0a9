"""Comparison pipeline: economic dispatch with LMPs, then LMP-weighted DNE
limits computed with the base points held fixed (the ODNE model)."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from . import formulation as fm
from .model import PowerSystem, ShiftFactorMatrix
from .robust import DEFAULT_EPSILON, CcgTrace, MasterInfeasible, run_ccg
from .solver import LinearProgram, solve_lp

LMP_FLOOR = 1e-3


class EdInfeasible(RuntimeError):
    pass


@dataclass
class EdDecision:
    obp: np.ndarray
    vrg_dispatch: np.ndarray
    total_cost: float
    lmp: np.ndarray  # per bus, in system.buses order

    def vrg_lmp(self, system: PowerSystem) -> np.ndarray:
        return np.array([self.lmp[system.bus_index(v.bus)] for v in system.vrg_units])


@dataclass
class OdneDecision:
    lower: np.ndarray
    upper: np.ndarray
    weighted_width: float
    fallback: bool = False
    ccg_iterations: int = 0
    trace: CcgTrace | None = None
    solve_seconds: float = 0.0


def solve_ed(system: PowerSystem, sf: ShiftFactorMatrix, forecast) -> EdDecision:
    """Least-cost base-case dispatch with VRG as free curtailable energy.

    ``lmp[n]`` is the sensitivity of total cost to load at bus ``n``: the
    balance dual plus the line-limit duals weighted by the shift factors.
    """
    lp = LinearProgram("ed")
    forecast = np.asarray(forecast, dtype=float)
    p_b = []
    for g in system.conventional_units:
        p_b.append(lp.add_var(f"pB[{g.id}]", g.p_min, g.p_max))
    # ramping as rows so that their duals do not hide in bounds
    for g, p in zip(system.conventional_units, p_b):
        lp.add_row({p: 1.0}, "<=", g.p_current + g.ramp, f"ramp_up[{g.id}]")
        lp.add_row({p: 1.0}, ">=", g.p_current - g.ramp, f"ramp_dn[{g.id}]")
    w = [lp.add_var(f"w[{v.id}]", 0.0, float(f)) for v, f in zip(system.vrg_units, forecast)]
    terms = [(g.bus, p, 1.0) for g, p in zip(system.conventional_units, p_b)]
    terms += [(v.bus, wi, 1.0) for v, wi in zip(system.vrg_units, w)]
    net = fm.add_network_rows(lp, system, sf, terms, -system.load_vector, "ed")
    obj: dict[int, float] = {}
    const = 0.0
    for i in range(len(system.conventional_units)):
        cobj, cconst = fm.add_cost(lp, system, i, p_b[i], "ed")
        fm.merge(obj, cobj)
        const += cconst
    lp.set_objective(obj, "min", const)
    sol = solve_lp(lp)
    if not sol.optimal:
        raise EdInfeasible(f"economic dispatch is {sol.status.value}")
    y = sol.duals
    # rhs of the balance row is -sum(injection constants) = +total load
    lmp = np.full(system.n_bus, y[net["balance"]])
    for l, (up, lo) in enumerate(zip(net["line_upper"], net["line_lower"])):
        lmp += (y[up] + y[lo]) * sf.matrix[l]
    return EdDecision(sol.values[p_b].copy(), sol.values[w].copy(), sol.objective, lmp)


@dataclass
class OdneConfig:
    epsilon: float = DEFAULT_EPSILON
    lmp_floor: float = LMP_FLOOR
    max_ccg_iter: int | None = None
    backend: str | None = None


def solve_odne(system: PowerSystem, sf: ShiftFactorMatrix, ed: EdDecision, config: OdneConfig | None = None) -> OdneDecision:
    """Maximize the LMP-weighted sum of DNE ranges at the ED base points."""
    config = config or OdneConfig()
    start = time.perf_counter()
    weights = np.maximum(ed.vrg_lmp(system), config.lmp_floor)
    lp = LinearProgram("odne")
    l, u = fm.add_limits(lp, system)
    p_b = [lp.add_var(f"pB[{g.id}]", float(p), float(p)) for g, p in zip(system.conventional_units, ed.obp)]
    obj = {}
    for j in range(system.n_vrg):
        obj[u[j]] = weights[j]
        obj[l[j]] = -weights[j]
    lp.set_objective(obj, "max")
    problem = fm.robust_dispatch_problem(lp, system, sf, l, u, p_b)
    try:
        sol, trace = run_ccg(problem, config.epsilon, config.max_ccg_iter, backend=config.backend)
    except MasterInfeasible:
        w = np.asarray(ed.vrg_dispatch, dtype=float)
        return OdneDecision(w.copy(), w.copy(), 0.0, fallback=True, solve_seconds=time.perf_counter() - start)
    lower, upper = sol.values[l].copy(), sol.values[u].copy()
    return OdneDecision(
        lower,
        upper,
        float(weights @ (upper - lower)),
        ccg_iterations=len(trace.iterations),
        trace=trace,
        solve_seconds=time.perf_counter() - start,
    )


def period_record(system: PowerSystem, ed: EdDecision, odne: OdneDecision) -> str:
    return json.dumps(
        {
            "obp": [float(x) for x in ed.obp],
            "lmp": {b: float(x) for b, x in zip(system.buses, ed.lmp)},
            "lower": [float(x) for x in odne.lower],
            "upper": [float(x) for x in odne.upper],
            "weighted_width": odne.weighted_width,
        }
    )
