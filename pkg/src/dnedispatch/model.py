"""Power system data model, JSON case ingestion and DC shift factors."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

BALANCE_TOL = 1e-6


class CaseError(ValueError):
    """Base class for case-file problems."""


class SchemaError(CaseError):
    pass


class TopologyError(CaseError):
    pass


class InvariantError(CaseError):
    pass


@dataclass(frozen=True)
class CostCurve:
    """Convex piecewise-linear cost.

    ``segments[s] = (breakpoint, marginal)`` prices output between the
    previous breakpoint (``p_min`` for the first segment) and ``breakpoint``
    at ``marginal`` $/MWh.  ``constant`` is the cost at ``p_min`` in $/h.
    """

    segments: tuple[tuple[float, float], ...]
    constant: float = 0.0

    def pieces(self, p_min: float) -> list[tuple[float, float, float]]:
        """``(start, width, marginal)`` for each segment."""
        out = []
        start = p_min
        for bp, mc in self.segments:
            out.append((start, max(bp - start, 0.0), mc))
            start = bp
        return out

    def evaluate(self, p: float, p_min: float) -> float:
        cost = self.constant
        for start, width, mc in self.pieces(p_min):
            cost += mc * min(max(p - start, 0.0), width)
        return cost

    @property
    def max_marginal(self) -> float:
        return max(mc for _, mc in self.segments)

    def scaled(self, factor: float) -> "CostCurve":
        return CostCurve(tuple((bp, mc * factor) for bp, mc in self.segments), self.constant * factor)


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    reactance: float
    capacity: float


@dataclass(frozen=True)
class ConventionalUnit:
    id: str
    bus: str
    control_class: str  # "CCU" or "NCCU"
    p_min: float
    p_max: float
    ramp: float
    corrective_adjust: float
    cost: CostCurve
    p_current: float

    @property
    def corrective(self) -> bool:
        return self.control_class == "CCU"

    def cost_at(self, p: float) -> float:
        return self.cost.evaluate(p, self.p_min)


@dataclass(frozen=True)
class VrgUnit:
    id: str
    bus: str
    capacity: float


@dataclass(frozen=True)
class PowerSystem:
    buses: tuple[str, ...]
    lines: tuple[Line, ...]
    conventional_units: tuple[ConventionalUnit, ...]
    vrg_units: tuple[VrgUnit, ...]
    loads: dict[str, float]
    slack_bus: str
    name: str = "case"
    base_mva: float = 100.0
    _bus_pos: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_bus_pos", {b: k for k, b in enumerate(self.buses)})
        validate_system(self)

    def bus_index(self, bus: str) -> int:
        return self._bus_pos[bus]

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_vrg(self) -> int:
        return len(self.vrg_units)

    @property
    def load_vector(self) -> np.ndarray:
        return np.array([self.loads.get(b, 0.0) for b in self.buses])

    @property
    def total_load(self) -> float:
        return float(sum(self.loads.values()))

    @property
    def vrg_capacity(self) -> np.ndarray:
        return np.array([v.capacity for v in self.vrg_units])

    @property
    def ccu(self) -> list[int]:
        return [i for i, g in enumerate(self.conventional_units) if g.corrective]

    @property
    def nccu(self) -> list[int]:
        return [i for i, g in enumerate(self.conventional_units) if not g.corrective]

    @property
    def p_current(self) -> np.ndarray:
        return np.array([g.p_current for g in self.conventional_units])

    @property
    def max_marginal_cost(self) -> float:
        return max((g.cost.max_marginal for g in self.conventional_units), default=0.0)

    def with_p_current(self, p0) -> "PowerSystem":
        units = []
        for g, p in zip(self.conventional_units, p0):
            units.append(replace(g, p_current=float(min(max(p, g.p_min), g.p_max))))
        return replace(self, conventional_units=tuple(units))

    def with_costs_scaled(self, factor: float) -> "PowerSystem":
        units = tuple(replace(g, cost=g.cost.scaled(factor)) for g in self.conventional_units)
        return replace(self, conventional_units=units)


def validate_system(system: PowerSystem) -> None:
    buses = set(system.buses)
    if len(buses) != len(system.buses):
        raise InvariantError("duplicate bus identifiers")
    if not system.buses:
        raise InvariantError("case declares no buses")
    if system.slack_bus not in buses:
        raise TopologyError(f"slack bus {system.slack_bus!r} is not a declared bus")

    def check_bus(bus, what):
        if bus not in buses:
            raise TopologyError(f"{what} references undeclared bus {bus!r}")

    for ln in system.lines:
        check_bus(ln.from_bus, f"line {ln.id!r}")
        check_bus(ln.to_bus, f"line {ln.id!r}")
        if ln.from_bus == ln.to_bus:
            raise InvariantError(f"line {ln.id!r} connects bus {ln.from_bus!r} to itself")
        if not ln.reactance > 0:
            raise InvariantError(f"line {ln.id!r}: reactance must be > 0")
        if not ln.capacity > 0:
            raise InvariantError(f"line {ln.id!r}: capacity must be > 0")
    for g in system.conventional_units:
        check_bus(g.bus, f"unit {g.id!r}")
        if g.control_class not in ("CCU", "NCCU"):
            raise InvariantError(f"unit {g.id!r}: class must be CCU or NCCU")
        if g.p_min > g.p_max:
            raise InvariantError(f"unit {g.id!r}: p_min > p_max")
        if g.ramp < 0 or g.corrective_adjust < 0:
            raise InvariantError(f"unit {g.id!r}: ramp and delta must be nonnegative")
        if not g.p_min - 1e-9 <= g.p_current <= g.p_max + 1e-9:
            raise InvariantError(f"unit {g.id!r}: p_current outside [p_min, p_max]")
        _validate_cost(g)
    for v in system.vrg_units:
        check_bus(v.bus, f"VRG unit {v.id!r}")
        if not v.capacity > 0:
            raise InvariantError(f"VRG unit {v.id!r}: capacity must be > 0")
    for bus, d in system.loads.items():
        check_bus(bus, "load")
        if d < 0:
            raise InvariantError(f"load at bus {bus!r} is negative")
    ids = [x.id for x in (*system.lines,)]
    if len(set(ids)) != len(ids):
        raise InvariantError("duplicate line identifiers")
    ids = [x.id for x in (*system.conventional_units, *system.vrg_units)]
    if len(set(ids)) != len(ids):
        raise InvariantError("duplicate unit identifiers")
    _check_connected(system)


def _validate_cost(g: ConventionalUnit) -> None:
    segs = g.cost.segments
    if not segs:
        raise InvariantError(f"unit {g.id!r}: cost curve has no segments")
    prev_bp, prev_mc = g.p_min, -math.inf
    for k, (bp, mc) in enumerate(segs):
        if k > 0 and bp <= prev_bp:
            raise InvariantError(f"unit {g.id!r}: cost breakpoints must be strictly increasing")
        if k == 0 and bp < g.p_min:
            raise InvariantError(f"unit {g.id!r}: first cost breakpoint below p_min")
        if mc < prev_mc:
            raise InvariantError(f"unit {g.id!r}: marginal costs must be non-decreasing (convexity)")
        prev_bp, prev_mc = bp, mc
    if segs[-1][0] < g.p_max - 1e-9:
        raise InvariantError(f"unit {g.id!r}: cost breakpoints do not reach p_max")


def _check_connected(system: PowerSystem) -> None:
    adj: dict[str, list[str]] = {b: [] for b in system.buses}
    for ln in system.lines:
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    seen = {system.slack_bus}
    queue = deque([system.slack_bus])
    while queue:
        for nb in adj[queue.popleft()]:
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    missing = [b for b in system.buses if b not in seen]
    if missing:
        raise TopologyError(f"network is disconnected; unreachable buses: {', '.join(missing)}")


# ---------------------------------------------------------------------------
# case files
# ---------------------------------------------------------------------------
_TOP_KEYS = {"buses", "slack_bus", "lines", "units", "vrg", "loads"}
_OPTIONAL_TOP = {"name", "base_mva"}
_LINE_KEYS = {"id", "from", "to", "reactance", "capacity"}
_UNIT_KEYS = {"id", "bus", "class", "p_min", "p_max", "ramp", "delta", "p_current", "cost"}
_VRG_KEYS = {"id", "bus", "capacity"}


def _keys(obj, required, where, optional=frozenset()):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    missing = required - obj.keys()
    if missing:
        raise SchemaError(f"{where}: missing field(s) {sorted(missing)}")
    unknown = obj.keys() - required - optional
    if unknown:
        raise SchemaError(f"{where}: unknown field(s) {sorted(unknown)}")


def _num(value, where) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaError(f"{where}: expected a finite number, got {value!r}")
    return float(value)


def _str(value, where) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"{where}: expected a string, got {value!r}")
    return value


def system_from_dict(data: dict) -> PowerSystem:
    _keys(data, _TOP_KEYS, "case", _OPTIONAL_TOP)
    if not isinstance(data["buses"], list):
        raise SchemaError("case.buses: expected an array")
    buses = tuple(_str(b, "case.buses[]") for b in data["buses"])
    lines = []
    for k, ln in enumerate(data["lines"]):
        where = f"lines[{k}]"
        _keys(ln, _LINE_KEYS, where)
        lines.append(
            Line(
                _str(ln["id"], where + ".id"),
                _str(ln["from"], where + ".from"),
                _str(ln["to"], where + ".to"),
                _num(ln["reactance"], where + ".reactance"),
                _num(ln["capacity"], where + ".capacity"),
            )
        )
    units = []
    for k, u in enumerate(data["units"]):
        where = f"units[{k}]"
        _keys(u, _UNIT_KEYS, where)
        cost = u["cost"]
        _keys(cost, {"constant", "segments"}, where + ".cost")
        segs = []
        for s in cost["segments"]:
            if not isinstance(s, list) or len(s) != 2:
                raise SchemaError(f"{where}.cost.segments: expected [breakpoint, marginal_cost] pairs")
            segs.append((_num(s[0], where + ".cost"), _num(s[1], where + ".cost")))
        units.append(
            ConventionalUnit(
                id=_str(u["id"], where + ".id"),
                bus=_str(u["bus"], where + ".bus"),
                control_class=_str(u["class"], where + ".class"),
                p_min=_num(u["p_min"], where + ".p_min"),
                p_max=_num(u["p_max"], where + ".p_max"),
                ramp=_num(u["ramp"], where + ".ramp"),
                corrective_adjust=_num(u["delta"], where + ".delta"),
                cost=CostCurve(tuple(segs), _num(cost["constant"], where + ".cost.constant")),
                p_current=_num(u["p_current"], where + ".p_current"),
            )
        )
    vrg = []
    for k, v in enumerate(data["vrg"]):
        where = f"vrg[{k}]"
        _keys(v, _VRG_KEYS, where)
        vrg.append(VrgUnit(_str(v["id"], where + ".id"), _str(v["bus"], where + ".bus"), _num(v["capacity"], where + ".capacity")))
    if not isinstance(data["loads"], dict):
        raise SchemaError("case.loads: expected an object bus -> MW")
    loads = {_str(b, "loads"): _num(d, f"loads[{b}]") for b, d in data["loads"].items()}
    return PowerSystem(
        buses=buses,
        lines=tuple(lines),
        conventional_units=tuple(units),
        vrg_units=tuple(vrg),
        loads=loads,
        slack_bus=_str(data["slack_bus"], "case.slack_bus"),
        name=_str(data.get("name", "case"), "case.name"),
        base_mva=_num(data.get("base_mva", 100.0), "case.base_mva"),
    )


def system_to_dict(system: PowerSystem) -> dict:
    return {
        "name": system.name,
        "base_mva": system.base_mva,
        "buses": list(system.buses),
        "slack_bus": system.slack_bus,
        "lines": [
            {"id": ln.id, "from": ln.from_bus, "to": ln.to_bus, "reactance": ln.reactance, "capacity": ln.capacity}
            for ln in system.lines
        ],
        "units": [
            {
                "id": g.id,
                "bus": g.bus,
                "class": g.control_class,
                "p_min": g.p_min,
                "p_max": g.p_max,
                "ramp": g.ramp,
                "delta": g.corrective_adjust,
                "p_current": g.p_current,
                "cost": {"constant": g.cost.constant, "segments": [list(s) for s in g.cost.segments]},
            }
            for g in system.conventional_units
        ],
        "vrg": [{"id": v.id, "bus": v.bus, "capacity": v.capacity} for v in system.vrg_units],
        "loads": dict(system.loads),
    }


def load_case(path) -> PowerSystem:
    """Read and validate a JSON case file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return system_from_dict(data)


def bundled_case_path(name: str) -> Path:
    """Path of a case shipped with the package (``smoke3``, ``six_bus``, ``twenty_bus``)."""
    return Path(str(resources.files("dnedispatch") / "data" / f"{name}.json"))


def load_bundled_case(name: str) -> PowerSystem:
    return load_case(bundled_case_path(name))


# ---------------------------------------------------------------------------
# shift factors
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ShiftFactorMatrix:
    """``matrix[l, n]``: flow change on line ``l`` per MW injected at bus ``n``
    and withdrawn at the slack bus."""

    matrix: np.ndarray
    buses: tuple[str, ...]
    lines: tuple[str, ...]
    slack_bus: str

    def __getitem__(self, key):
        return self.matrix[key]

    def column(self, bus: str) -> np.ndarray:
        return self.matrix[:, self.buses.index(bus)]


def compute_shift_factors(system: PowerSystem) -> ShiftFactorMatrix:
    n_bus, n_line = system.n_bus, len(system.lines)
    incidence = np.zeros((n_line, n_bus))
    b_line = np.zeros(n_line)
    for k, ln in enumerate(system.lines):
        incidence[k, system.bus_index(ln.from_bus)] = 1.0
        incidence[k, system.bus_index(ln.to_bus)] = -1.0
        b_line[k] = 1.0 / ln.reactance
    b_bus = incidence.T @ (b_line[:, None] * incidence)
    slack = system.bus_index(system.slack_bus)
    keep = [n for n in range(n_bus) if n != slack]
    b_red = b_bus[np.ix_(keep, keep)]
    sf = np.zeros((n_line, n_bus))
    if keep:
        if np.linalg.cond(b_red) > 1e12:
            raise np.linalg.LinAlgError("reduced susceptance matrix is singular; check line reactances")
        sf[:, keep] = (b_line[:, None] * incidence[:, keep]) @ np.linalg.inv(b_red)
    sf[np.abs(sf) < 1e-12] = 0.0
    return ShiftFactorMatrix(sf, system.buses, tuple(ln.id for ln in system.lines), system.slack_bus)


def line_flows(sf: ShiftFactorMatrix, injections) -> np.ndarray:
    inj = np.asarray(injections, dtype=float)
    if abs(inj.sum()) > BALANCE_TOL:
        raise ValueError(f"injections are unbalanced (net {inj.sum():.3g} MW)")
    return sf.matrix @ inj


def injection_vector(system: PowerSystem, p_conv, w_vrg) -> np.ndarray:
    """Net bus injections for given conventional and VRG outputs."""
    inj = -system.load_vector
    for g, p in zip(system.conventional_units, p_conv):
        inj[system.bus_index(g.bus)] += p
    for v, w in zip(system.vrg_units, w_vrg):
        inj[system.bus_index(v.bus)] += w
    return inj
