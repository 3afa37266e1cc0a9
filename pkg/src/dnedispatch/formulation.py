"""Row builders shared by the DNE, OBP and baseline models."""
from __future__ import annotations

import numpy as np

from .model import PowerSystem, ShiftFactorMatrix
from .robust import RecourseRow, TwoStageProblem
from .solver import INF, LinearProgram

SF_TOL = 1e-10


def add_cost(lp: LinearProgram, system: PowerSystem, unit: int, p_var: int, tag: str) -> tuple[dict[int, float], float]:
    """Encode the unit's convex piecewise cost of ``p_var``.

    Adds one segment variable per piece and the row
    ``p = p_min + sum(segments)``; returns objective terms and constant.
    """
    g = system.conventional_units[unit]
    link = {p_var: 1.0}
    obj = {}
    for s, (_, width, mc) in enumerate(g.cost.pieces(g.p_min)):
        d = lp.add_var(f"seg[{tag},{g.id},{s}]", 0.0, width)
        link[d] = -1.0
        obj[d] = mc
    lp.add_row(link, "=", g.p_min, f"cost_link[{tag},{g.id}]")
    return obj, g.cost.constant


def add_network_rows(
    lp: LinearProgram,
    system: PowerSystem,
    sf: ShiftFactorMatrix,
    terms: list[tuple[str, int, float]],
    fixed_injection: np.ndarray,
    tag: str,
    slack_price: float | None = None,
) -> dict:
    """Power balance and two-sided line limits for a set of injections.

    ``terms`` are ``(bus, variable, coefficient)`` contributions and
    ``fixed_injection`` holds per-bus constant injections (loads negative).
    With ``slack_price`` set, every row gets a priced nonnegative slack and the
    objective terms are returned under ``"objective"``.
    """
    out = {"balance": None, "line_upper": [], "line_lower": [], "objective": {}, "slacks": []}
    bal = {}
    for _, var, c in terms:
        bal[var] = bal.get(var, 0.0) + c
    bal_rhs = -float(np.sum(fixed_injection))

    def slack(name):
        s = lp.add_var(name)
        out["objective"][s] = slack_price
        out["slacks"].append(s)
        return s

    if slack_price is not None:
        bal[slack(f"slk_bal_up[{tag}]")] = 1.0
        bal[slack(f"slk_bal_dn[{tag}]")] = -1.0
    out["balance"] = lp.add_row(bal, "=", bal_rhs, f"balance[{tag}]")

    bus_of = [sf.buses.index(b) for b, _, _ in terms]
    for l, line_id in enumerate(sf.lines):
        row = {}
        for k, (_, var, c) in enumerate(terms):
            a = sf.matrix[l, bus_of[k]] * c
            if abs(a) > SF_TOL:
                row[var] = row.get(var, 0.0) + a
        const = float(sf.matrix[l] @ fixed_injection)
        cap = system.lines[l].capacity
        up, lo = dict(row), dict(row)
        if slack_price is not None:
            up[slack(f"slk_up[{tag},{line_id}]")] = -1.0
            lo[slack(f"slk_lo[{tag},{line_id}]")] = 1.0
        out["line_upper"].append(lp.add_row(up, "<=", cap - const, f"flow_up[{tag},{line_id}]"))
        out["line_lower"].append(lp.add_row(lo, ">=", -cap - const, f"flow_lo[{tag},{line_id}]"))
    return out


def add_base_case(lp: LinearProgram, system: PowerSystem, sf: ShiftFactorMatrix, forecast, tag: str = "base"):
    """Base-case dispatch variables and rows: balance, line limits, ramping,
    unit limits and VRG output within ``[0, forecast]``.

    Returns ``(p_b, w)`` index lists.
    """
    p_b = []
    for g in system.conventional_units:
        lo = max(g.p_min, g.p_current - g.ramp)
        hi = min(g.p_max, g.p_current + g.ramp)
        p_b.append(lp.add_var(f"pB[{g.id}]", lo, hi))
    w = [lp.add_var(f"w[{v.id}]", 0.0, float(f)) for v, f in zip(system.vrg_units, forecast)]
    terms = [(g.bus, p, 1.0) for g, p in zip(system.conventional_units, p_b)]
    terms += [(v.bus, wi, 1.0) for v, wi in zip(system.vrg_units, w)]
    add_network_rows(lp, system, sf, terms, -system.load_vector, tag)
    return p_b, w


def add_limits(lp: LinearProgram, system: PowerSystem, fixed=None):
    """DNE limit variables with ``0 <= l <= u <= W_max``; optionally fixed."""
    l, u = [], []
    for j, v in enumerate(system.vrg_units):
        if fixed is not None:
            lo, hi = fixed
            l.append(lp.add_var(f"l[{v.id}]", float(lo[j]), float(lo[j])))
            u.append(lp.add_var(f"u[{v.id}]", float(hi[j]), float(hi[j])))
        else:
            l.append(lp.add_var(f"l[{v.id}]", 0.0, v.capacity))
            u.append(lp.add_var(f"u[{v.id}]", 0.0, v.capacity))
            lp.add_row({l[-1]: 1.0, u[-1]: -1.0}, "<=", 0.0, f"order[{v.id}]")
    return l, u


def robust_dispatch_problem(
    lp: LinearProgram, system: PowerSystem, sf: ShiftFactorMatrix, l: list[int], u: list[int], p_b: list[int]
) -> TwoStageProblem:
    """Corrective-dispatch recourse rows for every VRG output in ``[l, u]``.

    VRG output is ``l + v * (u - l)``; recourse variables are the CCU outputs.
    Equalities are written as two inequalities.
    """
    units = system.conventional_units
    ccu = system.ccu
    names = [f"pC[{units[i].id}]" for i in ccu]
    y_of = {i: k for k, i in enumerate(ccu)}
    rows: list[RecourseRow] = []
    load = system.load_vector
    n_vrg = system.n_vrg

    def injection_row(weights: np.ndarray):
        """Row for ``sum_n weights[n] * injection[n]``: returns x, xv, y and constant."""
        x, xv, y = {}, [], {}
        for i, g in enumerate(units):
            a = weights[system.bus_index(g.bus)]
            if abs(a) <= SF_TOL:
                continue
            if i in y_of:
                y[y_of[i]] = y.get(y_of[i], 0.0) + a
            else:
                x[p_b[i]] = x.get(p_b[i], 0.0) + a
        for j, v in enumerate(system.vrg_units):
            a = weights[system.bus_index(v.bus)]
            if abs(a) <= SF_TOL:
                continue
            x[l[j]] = x.get(l[j], 0.0) + a
            xv.append((j, u[j], a))
            xv.append((j, l[j], -a))
        return x, xv, y, float(weights @ load)

    def neg(d):
        return {k: -c for k, c in d.items()}

    x, xv, y, const = injection_row(np.ones(system.n_bus))
    rows.append(RecourseRow(x, xv, y, const, "rc_balance_up"))
    rows.append(RecourseRow(neg(x), [(j, xi, -c) for j, xi, c in xv], neg(y), -const, "rc_balance_dn"))
    for k, line in enumerate(system.lines):
        x, xv, y, const = injection_row(sf.matrix[k])
        if not (x or xv or y):
            continue
        rows.append(RecourseRow(x, xv, y, line.capacity + const, f"rc_flow_up[{line.id}]"))
        rows.append(
            RecourseRow(neg(x), [(j, xi, -c) for j, xi, c in xv], neg(y), line.capacity - const, f"rc_flow_lo[{line.id}]")
        )
    for i in ccu:
        g = units[i]
        k = y_of[i]
        rows.append(RecourseRow({p_b[i]: -1.0}, [], {k: 1.0}, g.corrective_adjust, f"rc_adj_up[{g.id}]"))
        rows.append(RecourseRow({p_b[i]: 1.0}, [], {k: -1.0}, g.corrective_adjust, f"rc_adj_dn[{g.id}]"))
        rows.append(RecourseRow({}, [], {k: 1.0}, g.p_max, f"rc_pmax[{g.id}]"))
        rows.append(RecourseRow({}, [], {k: -1.0}, -g.p_min, f"rc_pmin[{g.id}]"))
    return TwoStageProblem(lp, n_vrg, names, rows)


def add_corrective_block(
    lp: LinearProgram,
    system: PowerSystem,
    sf: ShiftFactorMatrix,
    p_b,
    realized_vrg,
    tag: str,
    penalty: float | None = None,
    with_cost: bool = True,
) -> dict:
    """Corrective dispatch of CCUs for one realized VRG vector.

    ``p_b`` gives, per conventional unit, either a variable index (int) or a
    fixed output (float).  Returns variable indices and objective terms
    (CCU costs plus slack penalties).
    """
    units = system.conventional_units
    fixed_inj = -system.load_vector.copy()
    for v, w in zip(system.vrg_units, realized_vrg):
        fixed_inj[system.bus_index(v.bus)] += w
    terms = []
    p_c = {}
    obj: dict[int, float] = {}
    const = 0.0
    for i, g in enumerate(units):
        base = p_b[i]
        if g.corrective:
            if isinstance(base, (int, np.integer)):
                y = lp.add_var(f"pC[{tag},{g.id}]", g.p_min, g.p_max)
                lp.add_row({y: 1.0, int(base): -1.0}, "<=", g.corrective_adjust, f"adj_up[{tag},{g.id}]")
                lp.add_row({y: 1.0, int(base): -1.0}, ">=", -g.corrective_adjust, f"adj_dn[{tag},{g.id}]")
            else:
                lo = max(g.p_min, float(base) - g.corrective_adjust)
                hi = min(g.p_max, float(base) + g.corrective_adjust)
                y = lp.add_var(f"pC[{tag},{g.id}]", lo, max(lo, hi))
            p_c[i] = y
            terms.append((g.bus, y, 1.0))
            if with_cost:
                cobj, cconst = add_cost(lp, system, i, y, tag)
                for k, c in cobj.items():
                    obj[k] = obj.get(k, 0.0) + c
                const += cconst
        elif isinstance(base, (int, np.integer)):
            terms.append((g.bus, int(base), 1.0))
        else:
            fixed_inj[system.bus_index(g.bus)] += float(base)
    net = add_network_rows(lp, system, sf, terms, fixed_inj, tag, slack_price=penalty)
    for k, c in net["objective"].items():
        obj[k] = obj.get(k, 0.0) + c
    return {"p_c": p_c, "objective": obj, "constant": const, "slacks": net["slacks"]}


def default_penalty(system: PowerSystem) -> float:
    """Slack price: ten times the largest marginal cost in the case."""
    return 10.0 * max(system.max_marginal_cost, 1.0)


def merge(into: dict[int, float], terms: dict[int, float], scale: float = 1.0) -> None:
    for k, c in terms.items():
        into[k] = into.get(k, 0.0) + scale * c


__all__ = [
    "INF",
    "add_base_case",
    "add_corrective_block",
    "add_cost",
    "add_limits",
    "add_network_rows",
    "default_penalty",
    "merge",
    "robust_dispatch_problem",
]
