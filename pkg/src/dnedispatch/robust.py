"""Two-stage robust feasibility over the unit box and column-and-constraint generation.

A :class:`TwoStageProblem` couples a first-stage program over ``x`` with
recourse rows

    B_i x + sum_j v_j (C_ij x) + D_i y <= e_i        for all v in [0, 1]^n

where ``y`` are recourse variables chosen after ``v`` is revealed.  Rows are
stored in structured form so that the bilinear ``v``/``x`` coupling is
explicit; :meth:`TwoStageProblem.scenario_rows` instantiates them at a fixed
scenario.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .solver import (
    INF,
    LinearProgram,
    MixedIntegerProgram,
    Solution,
    SolveStatus,
    SolverError,
    solve_lp,
    solve_milp,
)

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-4
MAX_ENUMERATION_DIM = 12


@dataclass
class RecourseRow:
    x: dict[int, float]
    xv: list[tuple[int, int, float]]  # (uncertainty index j, x index, coefficient)
    y: dict[int, float]
    rhs: float
    name: str = ""


@dataclass
class TwoStageProblem:
    first_stage: LinearProgram
    uncertainty_dim: int
    recourse_names: list[str]
    rows: list[RecourseRow] = field(default_factory=list)

    def __post_init__(self):
        n_x, n_y = self.first_stage.num_vars, len(self.recourse_names)
        for row in self.rows:
            self._check(row, n_x, n_y)

    def _check(self, row: RecourseRow, n_x: int, n_y: int) -> None:
        # The structured form is affine in x for fixed v and affine in v for
        # fixed x by construction; here we only check index ranges.
        for j in row.x:
            if not 0 <= j < n_x:
                raise SolverError(f"recourse row {row.name!r} references unknown first-stage variable {j}")
        for j, xi, _ in row.xv:
            if not 0 <= j < self.uncertainty_dim or not 0 <= xi < n_x:
                raise SolverError(f"recourse row {row.name!r}: bad uncertainty term ({j}, {xi})")
        for k in row.y:
            if not 0 <= k < n_y:
                raise SolverError(f"recourse row {row.name!r} references unknown recourse variable {k}")

    def add_row(self, row: RecourseRow) -> None:
        self._check(row, self.first_stage.num_vars, len(self.recourse_names))
        self.rows.append(row)

    def scenario_rows(self, v) -> list[tuple[dict[int, float], dict[int, float], float]]:
        """Recourse rows at scenario ``v`` as ``(x coeffs, y coeffs, rhs)``."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.uncertainty_dim,) or np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
            raise ValueError("scenario must lie in the unit box")
        out = []
        for row in self.rows:
            coeffs = dict(row.x)
            for j, xi, c in row.xv:
                coeffs[xi] = coeffs.get(xi, 0.0) + v[j] * c
            out.append((coeffs, row.y, row.rhs))
        return out

    def rhs_at(self, x) -> tuple[np.ndarray, np.ndarray]:
        """At fixed ``x``: ``(r0, R)`` with row ``i`` reading ``D_i y <= r0_i - R_i . v``."""
        x = np.asarray(x, dtype=float)
        r0 = np.empty(len(self.rows))
        R = np.zeros((len(self.rows), self.uncertainty_dim))
        for i, row in enumerate(self.rows):
            r0[i] = row.rhs - sum(c * x[j] for j, c in row.x.items())
            for j, xi, c in row.xv:
                R[i, j] += c * x[xi]
        return r0, R


@dataclass
class CcgTrace:
    iterations: list[dict] = field(default_factory=list)
    terminal_theta: float = math.nan
    converged: bool = False

    def to_jsonl(self) -> str:
        return "".join(json.dumps(rec) + "\n" for rec in self.iterations)


class MasterInfeasible(RuntimeError):
    def __init__(self, trace: CcgTrace, status: SolveStatus):
        super().__init__(f"C&CG master problem is {status.value}")
        self.trace = trace
        self.status = status


class CcgNotConverged(RuntimeError):
    def __init__(self, trace: CcgTrace):
        super().__init__(f"C&CG did not converge; last theta = {trace.terminal_theta:.6g}")
        self.trace = trace


# ---------------------------------------------------------------------------
# subproblem
# ---------------------------------------------------------------------------
def _slack_lp(problem: TwoStageProblem, rhs: np.ndarray) -> LinearProgram:
    lp = LinearProgram("sp_inner")
    ys = [lp.add_var(f"y{k}", -INF, INF) for k in range(len(problem.recourse_names))]
    obj = {}
    for i, row in enumerate(problem.rows):
        s = lp.add_var(f"s{i}")
        obj[s] = 1.0
        coeffs = {ys[k]: c for k, c in row.y.items()}
        coeffs[s] = -1.0
        lp.add_row(coeffs, "<=", rhs[i])
    lp.set_objective(obj, "min")
    return lp


def inner_slack(problem: TwoStageProblem, x_fixed, v, backend: str | None = None) -> float:
    """Minimum total slack of the recourse rows at ``x_fixed`` and scenario ``v``."""
    r0, R = problem.rhs_at(x_fixed)
    sol = solve_lp(_slack_lp(problem, r0 - R @ np.asarray(v, dtype=float)), backend)
    if not sol.optimal:
        raise SolverError(f"slacked recourse LP returned {sol.status.value}")
    return max(sol.objective, 0.0)


def enumerate_subproblem(problem: TwoStageProblem, x_fixed, backend: str | None = None) -> tuple[float, np.ndarray]:
    """Exact worst-case slack by evaluating every vertex of the unit box."""
    n = problem.uncertainty_dim
    if n > MAX_ENUMERATION_DIM:
        raise ValueError(f"vertex enumeration refuses dimension {n} > {MAX_ENUMERATION_DIM}")
    best, worst = -1.0, np.zeros(n)
    for bits in itertools.product((0.0, 1.0), repeat=n):
        v = np.array(bits)
        val = inner_slack(problem, x_fixed, v, backend)
        if val > best + 1e-9:
            best, worst = val, v
    return best, worst


def solve_subproblem(problem: TwoStageProblem, x_fixed, backend: str | None = None) -> tuple[float, np.ndarray]:
    """Worst-case slack via the dual of the inner LP, as a single MILP.

    The inner value is convex in ``v``, so its maximum over the box sits at a
    vertex and ``v`` can be binary.  Duals of the slacked rows lie in
    ``[0, 1]``, so each product ``pi_i * v_j`` is linearized exactly with unit
    big-M bounds.
    """
    n = problem.uncertainty_dim
    r0, R = problem.rhs_at(x_fixed)
    mip = MixedIntegerProgram("sp_dual")
    pis = [mip.add_var(f"pi{i}", 0.0, 1.0) for i in range(len(problem.rows))]
    vs = [mip.add_binary(f"v{j}") for j in range(n)]
    obj = {pi: -r0[i] for i, pi in enumerate(pis)}
    for i, pi in enumerate(pis):
        for j in range(n):
            c = R[i, j]
            if abs(c) < 1e-12:
                continue
            q = mip.add_var(f"q{i}_{j}", 0.0, 1.0)
            obj[q] = c
            if c > 0:
                mip.add_row({q: 1.0, pi: -1.0}, "<=", 0.0)
                mip.add_row({q: 1.0, vs[j]: -1.0}, "<=", 0.0)
            else:
                mip.add_row({q: 1.0, pi: -1.0, vs[j]: -1.0}, ">=", -1.0)
    columns: dict[int, dict[int, float]] = {k: {} for k in range(len(problem.recourse_names))}
    for i, row in enumerate(problem.rows):
        for k, c in row.y.items():
            columns[k][pis[i]] = c
    for k, col in columns.items():
        if col:
            mip.add_row(col, "=", 0.0)
    mip.set_objective(obj, "max")
    sol = solve_milp(mip, gap_tol=1e-9, backend=backend)
    if sol.status is SolveStatus.UNBOUNDED:
        raise SolverError("subproblem dual is unbounded; recourse rows are malformed")
    if not sol.optimal:
        raise SolverError(f"subproblem MILP returned {sol.status.value}")
    worst = np.round(sol.values[vs]) if n else np.zeros(0)
    return max(sol.objective, 0.0), worst


# ---------------------------------------------------------------------------
# C&CG
# ---------------------------------------------------------------------------
def add_scenario_block(master: LinearProgram, problem: TwoStageProblem, v, tag: str) -> None:
    """Append recourse columns and rows for scenario ``v`` to ``master``."""
    ys = [master.add_var(f"{name}@{tag}", -INF, INF) for name in problem.recourse_names]
    for coeffs, ycoef, rhs in problem.scenario_rows(v):
        row = dict(coeffs)
        for k, c in ycoef.items():
            row[ys[k]] = c
        master.add_row(row, "<=", rhs)


def _solve_master(master: LinearProgram, gap_tol: float, backend: str | None) -> Solution:
    if getattr(master, "integral", None):
        return solve_milp(master, gap_tol=gap_tol, backend=backend)
    return solve_lp(master, backend)


def run_ccg(
    problem: TwoStageProblem,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int | None = None,
    *,
    subproblem: Callable | None = None,
    initial_scenarios=(),
    master_check: Callable[[Solution], None] | None = None,
    gap_tol: float = 1e-6,
    backend: str | None = None,
) -> tuple[Solution, CcgTrace]:
    """Column-and-constraint generation until the worst-case slack drops below ``epsilon``.

    Returns the master solution restricted to ``x`` (first-stage indices are
    preserved in the master) and the iteration trace.  ``master_check`` is
    called on every master solution and may raise to abort the loop.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = problem.uncertainty_dim
    if max_iter is None:
        max_iter = 2**n + 1 + len(initial_scenarios)
    subproblem = subproblem or solve_subproblem
    master = problem.first_stage.copy(name=problem.first_stage.name + "_master")
    trace = CcgTrace()
    added: set[tuple] = set()
    for v in initial_scenarios:
        key = tuple(np.round(np.asarray(v, dtype=float), 9))
        if key not in added:
            add_scenario_block(master, problem, v, f"s{len(added)}")
            added.add(key)
    n_x = problem.first_stage.num_vars
    for it in range(1, max_iter + 1):
        sol = _solve_master(master, gap_tol, backend)
        if not sol.optimal:
            trace.converged = False
            raise MasterInfeasible(trace, sol.status)
        if master_check is not None:
            master_check(sol)
        x = sol.values[:n_x]
        theta, worst = subproblem(problem, x, backend=backend)
        trace.iterations.append(
            {"iter": it, "master_obj": sol.objective, "theta": theta, "scenario": [float(a) for a in worst]}
        )
        trace.terminal_theta = theta
        log.debug("ccg iter %d: master %.6g theta %.3g", it, sol.objective, theta)
        if theta < epsilon:
            trace.converged = True
            sol.values = sol.values[:n_x]
            sol.names = problem.first_stage._index
            return sol, trace
        key = tuple(np.round(worst, 9))
        if key in added:
            raise SolverError(
                f"scenario {list(worst)} was already in the master but shows theta = {theta:.3g}; numerical trouble"
            )
        added.add(key)
        add_scenario_block(master, problem, worst, f"s{len(added)}")
    raise CcgNotConverged(trace)
