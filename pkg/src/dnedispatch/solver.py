"""LP / MILP layer used by every optimization model in the package.

Problems are assembled with :class:`LinearProgram` (or its binary-extended
sibling :class:`MixedIntegerProgram`) and handed to :func:`solve_lp` or
:func:`solve_milp`.  Two backends sit behind those calls:

``"highs"``
    scipy's HiGHS bindings (``linprog`` / ``milp``).  Default, fast.
``"native"``
    A dense two-phase revised simplex using Bland's rule plus a best-bound
    branch-and-bound.  Self-contained and deterministic; meant for small
    problems and for cross-checking the other backend.

:func:`brute_force_milp` is an exact oracle for problems with few binaries.

Setting the environment variable ``DNEDISPATCH_LP_DUMP`` to a directory makes
every solve write its problem there in CPLEX-LP text format.
"""
from __future__ import annotations

import heapq
import itertools
import math
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import LinearConstraint, linprog, milp

INF = math.inf
FEAS_TOL = 1e-7
INT_TOL = 1e-6
DEFAULT_GAP = 1e-6
MAX_BRUTE_FORCE_BINARIES = 20

_BACKEND_ENV = "DNEDISPATCH_SOLVER"
_DUMP_ENV = "DNEDISPATCH_LP_DUMP"
_default_backend = os.environ.get(_BACKEND_ENV, "highs")
_dump_counter = itertools.count()


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"
    NODE_LIMIT = "NodeLimit"


class SolverError(RuntimeError):
    """Raised for malformed problems or backend failures."""


class LinearProgram:
    """Sparse row-wise LP: ``min/max c'x`` subject to rows and variable bounds.

    Coefficient dicts may be keyed by variable index or by variable name.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self._index: dict[str, int] = {}
        self.rows: list[tuple[dict[int, float], str, float]] = []
        self.row_names: list[str] = []
        self.objective: dict[int, float] = {}
        self.sense = "min"
        self.obj_constant = 0.0

    # -- construction ---------------------------------------------------
    def add_var(self, name: str, lb: float = 0.0, ub: float = INF) -> int:
        if name in self._index:
            raise SolverError(f"duplicate variable {name!r}")
        if lb > ub:
            raise SolverError(f"variable {name!r}: lower bound {lb} > upper bound {ub}")
        idx = len(self.names)
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self._index[name] = idx
        return idx

    def _resolve(self, coeffs) -> dict[int, float]:
        out: dict[int, float] = {}
        n = len(self.names)
        for key, val in coeffs.items():
            idx = self._index[key] if isinstance(key, str) else int(key)
            if not 0 <= idx < n:
                raise SolverError(f"coefficient references undeclared variable {key!r}")
            if val != 0.0:
                out[idx] = out.get(idx, 0.0) + float(val)
        return out

    def add_row(self, coeffs, sense: str, rhs: float, name: str | None = None) -> int:
        if sense not in ("<=", ">=", "="):
            raise SolverError(f"unknown row sense {sense!r}")
        self.rows.append((self._resolve(coeffs), sense, float(rhs)))
        self.row_names.append(name or f"r{len(self.rows) - 1}")
        return len(self.rows) - 1

    def set_objective(self, coeffs, sense: str = "min", constant: float = 0.0) -> None:
        if sense not in ("min", "max"):
            raise SolverError(f"unknown objective sense {sense!r}")
        self.objective = self._resolve(coeffs)
        self.sense = sense
        self.obj_constant = float(constant)

    def set_bounds(self, var, lb: float | None = None, ub: float | None = None) -> None:
        idx = self.index(var) if isinstance(var, str) else var
        if lb is not None:
            self.lb[idx] = float(lb)
        if ub is not None:
            self.ub[idx] = float(ub)
        if self.lb[idx] > self.ub[idx]:
            raise SolverError(f"variable {self.names[idx]!r}: empty bounds")

    # -- queries ----------------------------------------------------------
    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def copy(self, name: str | None = None):
        new = self.__class__.__new__(self.__class__)
        new.__dict__.update(self.__dict__)
        new.name = name or self.name
        new.names = list(self.names)
        new.lb = list(self.lb)
        new.ub = list(self.ub)
        new._index = dict(self._index)
        new.rows = list(self.rows)
        new.row_names = list(self.row_names)
        new.objective = dict(self.objective)
        if hasattr(self, "integral"):
            new.integral = set(self.integral)
        return new

    def arrays(self):
        """Return ``(c, A, senses, rhs, lb, ub)`` with ``A`` in CSR form."""
        n, m = self.num_vars, self.num_rows
        c = np.zeros(n)
        for j, v in self.objective.items():
            c[j] = v
        data, ri, ci = [], [], []
        for i, (coeffs, _, _) in enumerate(self.rows):
            for j, v in coeffs.items():
                ri.append(i)
                ci.append(j)
                data.append(v)
        A = sp.csr_matrix((data, (ri, ci)), shape=(m, n))
        senses = np.array([s for _, s, _ in self.rows], dtype=object)
        rhs = np.array([r for _, _, r in self.rows], dtype=float)
        return c, A, senses, rhs, np.array(self.lb), np.array(self.ub)

    def row_activity(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([sum(v * x[j] for j, v in coeffs.items()) for coeffs, _, _ in self.rows])

    def primal_residual(self, x) -> float:
        """Largest bound or row violation at ``x``."""
        x = np.asarray(x, dtype=float)
        res = 0.0
        if self.num_vars:
            res = max(res, float(np.max(np.maximum(np.array(self.lb) - x, 0.0))))
            res = max(res, float(np.max(np.maximum(x - np.array(self.ub), 0.0))))
        act = self.row_activity(x)
        for a, (_, sense, rhs) in zip(act, self.rows):
            if sense == "<=":
                res = max(res, a - rhs)
            elif sense == ">=":
                res = max(res, rhs - a)
            else:
                res = max(res, abs(a - rhs))
        return res

    def objective_value(self, x) -> float:
        return float(self.obj_constant + sum(v * x[j] for j, v in self.objective.items()))


class MixedIntegerProgram(LinearProgram):
    """LinearProgram plus a set of variables restricted to {0, 1}."""

    def __init__(self, name: str = "mip"):
        super().__init__(name)
        self.integral: set[int] = set()

    def add_binary(self, name: str, lb: float = 0.0, ub: float = 1.0) -> int:
        if lb < 0.0 or ub > 1.0:
            raise SolverError(f"binary {name!r} must have bounds within [0, 1]")
        idx = self.add_var(name, lb, ub)
        self.integral.add(idx)
        return idx

    @classmethod
    def from_lp(cls, lp: LinearProgram, integral=()) -> "MixedIntegerProgram":
        mip = cls.__new__(cls)
        mip.__dict__.update(lp.copy().__dict__)
        mip.integral = set()
        for v in integral:
            idx = lp.index(v) if isinstance(v, str) else int(v)
            if mip.lb[idx] < 0.0 or mip.ub[idx] > 1.0:
                raise SolverError(f"binary {mip.names[idx]!r} must have bounds within [0, 1]")
            mip.integral.add(idx)
        return mip

    @property
    def base(self) -> LinearProgram:
        lp = LinearProgram.__new__(LinearProgram)
        lp.__dict__.update(self.copy().__dict__)
        del lp.__dict__["integral"]
        return lp


@dataclass
class Solution:
    status: SolveStatus
    values: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    bound_duals: np.ndarray | None = None
    names: dict[str, int] = field(default_factory=dict, repr=False)
    iterations: int = 0
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names[name]])

    def get(self, names) -> np.ndarray:
        return np.array([self.values[self.names[n]] for n in names])


def get_default_backend() -> str:
    return _default_backend


def set_default_backend(name: str) -> None:
    global _default_backend
    if name not in ("highs", "native"):
        raise SolverError(f"unknown backend {name!r}")
    _default_backend = name


# ---------------------------------------------------------------------------
# LP text dump (CPLEX-LP dialect)
# ---------------------------------------------------------------------------
_LP_NAME_BAD = re.compile(r"[^A-Za-z0-9_.()\{\}!\"#$%&/,;?@`'|~]")


def _lp_name(name: str) -> str:
    name = _LP_NAME_BAD.sub("_", name.replace("[", "(").replace("]", ")"))
    if name[0].isdigit() or name[0] in ".eE":
        name = "_" + name
    return name


def _lp_expr(coeffs: dict[int, float], names: list[str]) -> str:
    if not coeffs:
        return "0 " + names[0] if names else "0"
    parts = []
    for j in sorted(coeffs):
        v = coeffs[j]
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {abs(v):.12g} {names[j]}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def write_lp(problem: LinearProgram) -> str:
    """Render ``problem`` as CPLEX-LP text."""
    names = [_lp_name(n) for n in problem.names]
    lines = ["\\ " + problem.name, "Maximize" if problem.sense == "max" else "Minimize"]
    obj = _lp_expr(problem.objective, names)
    if problem.obj_constant:
        obj += f" + {problem.obj_constant:.12g} constant"
    lines.append(" obj: " + obj)
    lines.append("Subject To")
    ops = {"<=": "<=", ">=": ">=", "=": "="}
    for i, (coeffs, sense, rhs) in enumerate(problem.rows):
        lines.append(f" {_lp_name(problem.row_names[i])}: {_lp_expr(coeffs, names)} {ops[sense]} {rhs:.12g}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = problem.lb[j], problem.ub[j]
        if problem.obj_constant and name == "constant":
            continue
        if lo == -INF and hi == INF:
            lines.append(f" {name} free")
        elif lo == hi:
            lines.append(f" {name} = {lo:.12g}")
        else:
            lo_s = "-inf" if lo == -INF else f"{lo:.12g}"
            hi_s = "+inf" if hi == INF else f"{hi:.12g}"
            lines.append(f" {lo_s} <= {name} <= {hi_s}")
    if problem.obj_constant:
        lines.append(" constant = 1")
    integral = sorted(getattr(problem, "integral", ()))
    if integral:
        lines.append("Binaries")
        lines.append(" " + " ".join(names[j] for j in integral))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _maybe_dump(problem: LinearProgram) -> None:
    target = os.environ.get(_DUMP_ENV)
    if not target:
        return
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    (path / f"{_lp_name(problem.name)}_{next(_dump_counter):05d}.lp").write_text(write_lp(problem))


# ---------------------------------------------------------------------------
# Native simplex
# ---------------------------------------------------------------------------
_PIVOT_TOL = 1e-9


def _revised_simplex(c, A, b, basis, max_iter):
    """Bland-rule revised simplex on ``min c'x, Ax = b, x >= 0`` from a feasible basis.

    Returns ``(status, x, basis, y, iterations)``.
    """
    m, n = A.shape
    basis = list(basis)
    for it in range(max_iter):
        B = A[:, basis]
        try:
            xb = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular basis in native simplex") from exc
        reduced = c - A.T @ y
        in_basis = np.zeros(n, dtype=bool)
        in_basis[basis] = True
        candidates = np.flatnonzero((reduced < -_PIVOT_TOL) & ~in_basis)
        if candidates.size == 0:
            x = np.zeros(n)
            x[basis] = xb
            return SolveStatus.OPTIMAL, x, basis, y, it
        enter = int(candidates[0])
        d = np.linalg.solve(B, A[:, enter])
        pos = np.flatnonzero(d > _PIVOT_TOL)
        if pos.size == 0:
            return SolveStatus.UNBOUNDED, None, basis, None, it
        ratios = np.maximum(xb[pos], 0.0) / d[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12]
        leave = min(ties, key=lambda r: basis[r])
        basis[leave] = enter
    return SolveStatus.ITERATION_LIMIT, None, basis, None, max_iter


def _to_standard_form(lp: LinearProgram, lb, ub):
    """Map the LP onto ``min c'x, Ax = b, x >= 0, b >= 0``.

    Returns the standard-form data and the affine map back to the original
    variables (``x = shift + T @ x_std``).
    """
    n = lp.num_vars
    cols: list[list[tuple[int, float]]] = []  # std column -> [(orig var, sign)]
    T_rows, T_cols, T_vals = [], [], []
    shift = np.zeros(n)
    extra_rows = []  # (std col, ub - lb)
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if lo > -INF:
            shift[j] = lo
            k = len(cols)
            cols.append([(j, 1.0)])
            T_rows.append(j); T_cols.append(k); T_vals.append(1.0)
            if hi < INF:
                extra_rows.append((k, hi - lo))
        elif hi < INF:
            shift[j] = hi
            k = len(cols)
            cols.append([(j, -1.0)])
            T_rows.append(j); T_cols.append(k); T_vals.append(-1.0)
        else:
            for sign in (1.0, -1.0):
                k = len(cols)
                cols.append([(j, sign)])
                T_rows.append(j); T_cols.append(k); T_vals.append(sign)
    n_struct = len(cols)
    T = sp.csr_matrix((T_vals, (T_rows, T_cols)), shape=(n, n_struct)).toarray()

    c_orig, A_orig, senses, rhs, _, _ = lp.arrays()
    if lp.sense == "max":
        c_orig = -c_orig
    A_dense = A_orig.toarray()
    m0 = lp.num_rows
    m = m0 + len(extra_rows)
    n_slack = sum(1 for s in senses if s != "=") + len(extra_rows)
    A = np.zeros((m, n_struct + n_slack))
    b = np.zeros(m)
    A[:m0, :n_struct] = A_dense @ T
    b[:m0] = rhs - A_dense @ shift
    s = n_struct
    for i, sense in enumerate(senses):
        if sense == "<=":
            A[i, s] = 1.0
            s += 1
        elif sense == ">=":
            A[i, s] = -1.0
            s += 1
    for r, (k, width) in enumerate(extra_rows):
        A[m0 + r, k] = 1.0
        A[m0 + r, s] = 1.0
        b[m0 + r] = width
        s += 1
    row_sign = np.where(b < 0, -1.0, 1.0)
    A *= row_sign[:, None]
    b *= row_sign
    c = np.zeros(A.shape[1])
    c[:n_struct] = T.T @ c_orig
    return c, A, b, T, shift, row_sign, m0


def _native_lp(lp: LinearProgram, lb=None, ub=None, max_iter: int = 20000) -> Solution:
    lb = np.array(lp.lb if lb is None else lb, dtype=float)
    ub = np.array(lp.ub if ub is None else ub, dtype=float)
    if np.any(lb > ub + FEAS_TOL):
        return Solution(SolveStatus.INFEASIBLE, names=lp._index)
    ub = np.maximum(ub, lb)
    c, A, b, T, shift, row_sign, m0 = _to_standard_form(lp, lb, ub)
    m, n = A.shape
    if m == 0:
        if np.any(c < -_PIVOT_TOL):
            return Solution(SolveStatus.UNBOUNDED, names=lp._index)
        return _finish_native(lp, np.zeros(n), T, shift, np.zeros(0), row_sign, m0, 0)

    # phase 1: one artificial per row
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    status, x1, basis, _, it1 = _revised_simplex(c1, A1, b, range(n, n + m), max_iter)
    if status is SolveStatus.ITERATION_LIMIT:
        return Solution(SolveStatus.ITERATION_LIMIT, names=lp._index, iterations=it1)
    if x1[n:].sum() > FEAS_TOL * max(1.0, np.abs(b).max()):
        return Solution(SolveStatus.INFEASIBLE, names=lp._index, iterations=it1)

    # drive degenerate artificials out of the basis; drop redundant rows
    dropped_rows, dropped_pos = set(), set()
    for r in range(m):
        if basis[r] < n:
            continue
        Binv_row = np.linalg.solve(A1[:, basis].T, np.eye(m)[r])
        row = Binv_row @ A
        nonbasic = [j for j in range(n) if j not in basis and abs(row[j]) > 1e-7]
        if nonbasic:
            basis[r] = nonbasic[0]
        else:
            # the artificial's own row is a combination of the others
            dropped_rows.add(basis[r] - n)
            dropped_pos.add(r)
    keep = [i for i in range(m) if i not in dropped_rows]
    basis = [basis[r] for r in range(m) if r not in dropped_pos]
    A2, b2 = A[keep], b[keep]
    status, x, basis, y_kept, it2 = _revised_simplex(c, A2, b2, basis, max_iter)
    iters = it1 + it2
    if status is not SolveStatus.OPTIMAL:
        return Solution(status, names=lp._index, iterations=iters)
    y = np.zeros(m)
    y[keep] = y_kept
    return _finish_native(lp, x, T, shift, y, row_sign, m0, iters)


def _finish_native(lp, x_std, T, shift, y_std, row_sign, m0, iters) -> Solution:
    n_struct = T.shape[1]
    x = shift + T @ x_std[:n_struct]
    duals = (y_std * row_sign)[:m0] if m0 else np.zeros(0)
    if lp.sense == "max":
        duals = -duals
    sol = Solution(
        SolveStatus.OPTIMAL,
        values=x,
        objective=lp.objective_value(x),
        duals=duals,
        names=lp._index,
        iterations=iters,
    )
    sol.bound_duals = reduced_costs(lp, sol.duals)
    return sol


def reduced_costs(lp: LinearProgram, duals) -> np.ndarray:
    """``c - A'y`` in the original variable space (shadow-price convention)."""
    c, A, *_ = lp.arrays()
    return c - A.T @ np.asarray(duals, dtype=float)


def dual_objective(lp: LinearProgram, sol: Solution) -> float:
    """Dual objective implied by row duals and reduced costs of ``sol``."""
    _, _, _, rhs, lb, ub = lp.arrays()
    d = sol.bound_duals
    val = lp.obj_constant + float(rhs @ sol.duals)
    for j, dj in enumerate(d):
        if abs(dj) <= 1e-12:
            continue
        at_lower = dj > 0 if lp.sense == "min" else dj < 0
        bound = lb[j] if at_lower else ub[j]
        if math.isinf(bound):
            # dual infeasible in that direction; use the primal value
            bound = sol.values[j]
        val += dj * bound
    return val


# ---------------------------------------------------------------------------
# HiGHS backend
# ---------------------------------------------------------------------------
def _split_rows(A, senses, rhs):
    le = np.flatnonzero(senses == "<=")
    ge = np.flatnonzero(senses == ">=")
    eq = np.flatnonzero(senses == "=")
    ub_idx = np.concatenate([le, ge])
    sign = np.concatenate([np.ones(le.size), -np.ones(ge.size)])
    A_ub = sp.diags(sign) @ A[ub_idx] if ub_idx.size else None
    b_ub = sign * rhs[ub_idx] if ub_idx.size else None
    A_eq = A[eq] if eq.size else None
    b_eq = rhs[eq] if eq.size else None
    return A_ub, b_ub, A_eq, b_eq, ub_idx, sign, eq


def _highs_lp(lp: LinearProgram, lb=None, ub=None) -> Solution:
    c, A, senses, rhs, lb0, ub0 = lp.arrays()
    lb = lb0 if lb is None else np.asarray(lb, dtype=float)
    ub = ub0 if ub is None else np.asarray(ub, dtype=float)
    if np.any(lb > ub + FEAS_TOL):
        return Solution(SolveStatus.INFEASIBLE, names=lp._index)
    if lp.num_vars == 0:
        ok = all(
            (s == "<=" and 0 <= r + FEAS_TOL) or (s == ">=" and 0 >= r - FEAS_TOL) or (s == "=" and abs(r) <= FEAS_TOL)
            for s, r in zip(senses, rhs)
        )
        if not ok:
            return Solution(SolveStatus.INFEASIBLE, names=lp._index)
        return Solution(SolveStatus.OPTIMAL, np.zeros(0), lp.obj_constant, np.zeros(lp.num_rows), np.zeros(0), lp._index)
    sign_obj = -1.0 if lp.sense == "max" else 1.0
    A_ub, b_ub, A_eq, b_eq, ub_idx, sign, eq = _split_rows(A, senses, rhs)
    res = linprog(
        sign_obj * c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=np.column_stack([np.where(np.isinf(lb), None, lb), np.where(np.isinf(ub), None, ub)]),
        method="highs",
    )
    status = {0: SolveStatus.OPTIMAL, 1: SolveStatus.ITERATION_LIMIT, 2: SolveStatus.INFEASIBLE, 3: SolveStatus.UNBOUNDED}.get(
        res.status
    )
    if status is None:
        raise SolverError(f"HiGHS failure: {res.message}")
    if status is not SolveStatus.OPTIMAL:
        return Solution(status, names=lp._index, iterations=int(getattr(res, "nit", 0)))
    duals = np.zeros(lp.num_rows)
    if ub_idx.size:
        duals[ub_idx] = sign * res.ineqlin.marginals
    if eq.size:
        duals[eq] = res.eqlin.marginals
    duals *= sign_obj
    x = np.asarray(res.x, dtype=float)
    sol = Solution(SolveStatus.OPTIMAL, x, lp.objective_value(x), duals, names=lp._index, iterations=int(res.nit))
    sol.bound_duals = reduced_costs(lp, duals)
    return sol


def _highs_milp(mip: MixedIntegerProgram, gap_tol: float, node_limit: int | None) -> Solution:
    c, A, senses, rhs, lb, ub = mip.arrays()
    sign_obj = -1.0 if mip.sense == "max" else 1.0
    integrality = np.zeros(mip.num_vars)
    integrality[list(mip.integral)] = 1
    row_lo = np.where(senses == "<=", -np.inf, rhs)
    row_hi = np.where(senses == ">=", np.inf, rhs)
    constraints = [LinearConstraint(A, row_lo, row_hi)] if mip.num_rows else []
    options = {"mip_rel_gap": gap_tol}
    if node_limit is not None:
        options["node_limit"] = node_limit
    if mip.num_vars == 0:
        return _highs_lp(mip.base)
    res = milp(
        sign_obj * c,
        integrality=integrality,
        bounds=(lb, ub),
        constraints=constraints,
        options=options,
    )
    if res.status == 2:
        return Solution(SolveStatus.INFEASIBLE, names=mip._index)
    if res.status == 3:
        return Solution(SolveStatus.UNBOUNDED, names=mip._index)
    if res.x is None:
        if res.status == 1:
            return Solution(SolveStatus.NODE_LIMIT, names=mip._index)
        raise SolverError(f"HiGHS failure: {res.message}")
    x = np.asarray(res.x, dtype=float)
    for j in mip.integral:
        x[j] = round(x[j])
    status = SolveStatus.OPTIMAL if res.status == 0 else SolveStatus.NODE_LIMIT
    # HiGHS MIP reports continuous values only to its feasibility tolerance;
    # re-solve the LP with the integers fixed to get exact ones
    fix_lb, fix_ub = lb.copy(), ub.copy()
    idx = list(mip.integral)
    fix_lb[idx] = fix_ub[idx] = x[idx]
    polish = _highs_lp(mip, fix_lb, fix_ub)
    if polish.optimal:
        x = polish.values
        x[idx] = fix_lb[idx]
    return Solution(status, x, mip.objective_value(x), names=mip._index)


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------
def solve_lp(lp: LinearProgram, backend: str | None = None, *, lb=None, ub=None, max_iter: int = 20000) -> Solution:
    """Solve ``lp`` (integrality, if any, is ignored).

    ``lb``/``ub`` optionally override the variable bounds without copying
    the problem.
    """
    backend = backend or _default_backend
    _maybe_dump(lp)
    if backend == "native":
        return _native_lp(lp, lb, ub, max_iter)
    if backend == "highs":
        return _highs_lp(lp, lb, ub)
    raise SolverError(f"unknown backend {backend!r}")


def solve_milp(
    mip: MixedIntegerProgram,
    gap_tol: float = DEFAULT_GAP,
    backend: str | None = None,
    node_limit: int | None = 200000,
) -> Solution:
    """Solve a binary MILP to within relative gap ``gap_tol`` of the optimum."""
    if gap_tol < 0:
        raise SolverError("gap_tol must be nonnegative")
    backend = backend or _default_backend
    integral = getattr(mip, "integral", set())
    _maybe_dump(mip)
    if not integral:
        return solve_lp(mip, backend)
    if backend == "highs":
        return _highs_milp(mip, gap_tol, node_limit)
    if backend == "native":
        return _branch_and_bound(mip, gap_tol, node_limit)
    raise SolverError(f"unknown backend {backend!r}")


def _branch_and_bound(mip: MixedIntegerProgram, gap_tol: float, node_limit: int | None) -> Solution:
    """Best-bound branch-and-bound, branching on the most fractional binary."""
    flip = -1.0 if mip.sense == "max" else 1.0  # work in minimization terms
    integral = sorted(mip.integral)
    lb0 = np.array(mip.lb)
    ub0 = np.array(mip.ub)
    counter = itertools.count()
    heap: list = []

    def relax(lb, ub):
        return _native_lp(mip, lb, ub)

    root = relax(lb0, ub0)
    if root.status is SolveStatus.INFEASIBLE:
        return Solution(SolveStatus.INFEASIBLE, names=mip._index, nodes=1)
    if root.status is not SolveStatus.OPTIMAL:
        return Solution(root.status, names=mip._index, nodes=1)
    heapq.heappush(heap, (flip * root.objective, next(counter), lb0, ub0, root))
    incumbent: Solution | None = None
    best = INF
    nodes = 0
    while heap:
        bound, _, lb, ub, sol = heapq.heappop(heap)
        tol = gap_tol * max(1.0, abs(best)) if best < INF else 0.0
        if bound >= best - tol - 1e-9:
            continue
        nodes += 1
        if node_limit is not None and nodes > node_limit:
            if incumbent is None:
                return Solution(SolveStatus.NODE_LIMIT, names=mip._index, nodes=nodes)
            incumbent.status = SolveStatus.NODE_LIMIT
            return incumbent
        frac = [(abs(sol.values[j] - round(sol.values[j])), j) for j in integral]
        worst, branch_var = max(frac, key=lambda t: (t[0], -t[1]))
        if worst <= INT_TOL:
            x = sol.values.copy()
            x[integral] = np.round(x[integral])
            best = bound
            incumbent = Solution(SolveStatus.OPTIMAL, x, mip.objective_value(x), names=mip._index)
            continue
        for fix in (0.0, 1.0):
            lb_c, ub_c = lb.copy(), ub.copy()
            lb_c[branch_var] = ub_c[branch_var] = fix
            child = relax(lb_c, ub_c)
            if child.status is SolveStatus.OPTIMAL and flip * child.objective < best:
                heapq.heappush(heap, (flip * child.objective, next(counter), lb_c, ub_c, child))
            elif child.status is SolveStatus.UNBOUNDED:
                return Solution(SolveStatus.UNBOUNDED, names=mip._index, nodes=nodes)
    if incumbent is None:
        return Solution(SolveStatus.INFEASIBLE, names=mip._index, nodes=nodes)
    incumbent.nodes = nodes
    return incumbent


def brute_force_milp(mip: MixedIntegerProgram, backend: str | None = None) -> Solution:
    """Exact optimum by enumerating every binary assignment (at most 20 binaries)."""
    integral = sorted(getattr(mip, "integral", ()))
    if len(integral) > MAX_BRUTE_FORCE_BINARIES:
        raise SolverError(f"brute force refuses {len(integral)} binaries (limit {MAX_BRUTE_FORCE_BINARIES})")
    backend = backend or _default_backend
    lb0 = np.array(mip.lb)
    ub0 = np.array(mip.ub)
    flip = -1.0 if mip.sense == "max" else 1.0
    best: Solution | None = None
    saw_unbounded = False
    for bits in itertools.product((0.0, 1.0), repeat=len(integral)):
        lb, ub = lb0.copy(), ub0.copy()
        skip = False
        for j, b in zip(integral, bits):
            if b < lb0[j] or b > ub0[j]:
                skip = True
                break
            lb[j] = ub[j] = b
        if skip:
            continue
        sol = solve_lp(mip, backend, lb=lb, ub=ub)
        if sol.status is SolveStatus.UNBOUNDED:
            saw_unbounded = True
        if sol.status is SolveStatus.OPTIMAL and (best is None or flip * sol.objective < flip * best.objective - 1e-9):
            best = sol
    if best is None:
        status = SolveStatus.UNBOUNDED if saw_unbounded else SolveStatus.INFEASIBLE
        return Solution(status, names=mip._index)
    return Solution(SolveStatus.OPTIMAL, best.values, best.objective, names=mip._index)
