"""Receding-horizon dispatch simulation for the proposed method and the
ED + ODNE baseline."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baseline import EdInfeasible, OdneConfig, solve_ed, solve_odne
from .dne import DneConfig, DneInfeasible, coverage_count, solve_dne
from .model import PowerSystem, ShiftFactorMatrix, compute_shift_factors
from .obp import ObpConfig, ObpInfeasible, corrective_cost, solve_obp
from .robust import DEFAULT_EPSILON, CcgNotConverged
from .sampling import History, HistoryRecord, select_samples
from .solver import SolverError

log = logging.getLogger(__name__)

METHODS = ("proposed", "odne")
PENALTY_MODES = ("penalized", "strict")
COVER_TOL = 1e-6


@dataclass
class SimulationConfig:
    method: str = "proposed"
    n_dne: int = 400
    n_obp: int = 20
    epsilon: float = DEFAULT_EPSILON
    horizon: list[int] | None = None  # indices into the validation series; None means all
    penalty_mode: str = "penalized"
    formulation: str = "dne3"
    backend: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.penalty_mode not in PENALTY_MODES:
            raise ValueError(f"penalty_mode must be one of {PENALTY_MODES}")
        if self.n_dne < 1 or self.n_obp < 1:
            raise ValueError("sample counts must be at least 1")
        if self.horizon is not None and len(self.horizon) == 0:
            raise ValueError("horizon is empty")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class DispatchDecision:
    base_obp: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


@dataclass
class PeriodResult:
    period: int
    method: str
    covered: bool
    wind_output_mw: float
    dispatch_cost: float
    dne_width: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    observed: np.ndarray
    realized_vrg: np.ndarray
    base_obp: np.ndarray
    corrective: np.ndarray
    slack_used: float
    cpu_dne_s: float = 0.0
    cpu_obp_s: float = 0.0
    in_sample_covered: int = -1
    n_in_sample: int = 0
    infeasible: bool = False
    failed: bool = False
    message: str = ""

    @property
    def curtailment_mw(self) -> float:
        return float(np.sum(self.observed - self.realized_vrg))


@dataclass
class SimReport:
    method: str
    per_period: list[PeriodResult] = field(default_factory=list)

    @property
    def coverage_rate(self) -> float:
        return sum(r.covered for r in self.per_period) / len(self.per_period)

    @property
    def avg_cost(self) -> float:
        costs = [r.dispatch_cost for r in self.per_period if np.isfinite(r.dispatch_cost)]
        return float(np.mean(costs)) if costs else float("nan")

    @property
    def avg_wind(self) -> float:
        return float(np.mean([r.wind_output_mw for r in self.per_period]))

    @property
    def total_wind(self) -> float:
        return float(np.sum([r.wind_output_mw for r in self.per_period]))

    @property
    def avg_cpu(self) -> float:
        return float(np.mean([r.cpu_dne_s + r.cpu_obp_s for r in self.per_period]))

    def summary(self) -> dict:
        return {
            "method": self.method,
            "periods": len(self.per_period),
            "coverage_rate": self.coverage_rate,
            "avg_cost": self.avg_cost,
            "avg_wind": self.avg_wind,
            "total_wind": self.total_wind,
            "avg_cpu": self.avg_cpu,
            "avg_in_sample_covered": float(np.mean([r.in_sample_covered for r in self.per_period])),
            "infeasible_periods": sum(r.infeasible for r in self.per_period),
            "failed_periods": sum(r.failed for r in self.per_period),
        }

    def write(self, out_dir, vrg_ids) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_periods_csv(out / "periods.csv", self.per_period, vrg_ids)
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2) + "\n", encoding="utf-8")


def periods_header(vrg_ids) -> list[str]:
    vrg_ids = list(vrg_ids)
    return (
        ["period", "method", "covered", "wind_output_mw", "dispatch_cost"]
        + [f"coverage_width_{v}" for v in vrg_ids]
        + ["cpu_dne_s", "cpu_obp_s", "slack_mw"]
        + [f"lower_{v}" for v in vrg_ids]
        + [f"upper_{v}" for v in vrg_ids]
        + [f"observed_{v}" for v in vrg_ids]
        + ["in_sample_covered", "n_in_sample", "infeasible", "failed"]
    )


def write_periods_csv(path, results, vrg_ids) -> None:
    fmt = "{:.6f}".format
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(periods_header(vrg_ids))
        for r in results:
            writer.writerow(
                [r.period, r.method, int(r.covered), fmt(r.wind_output_mw), fmt(r.dispatch_cost)]
                + [fmt(x) for x in r.dne_width]
                + [fmt(r.cpu_dne_s), fmt(r.cpu_obp_s), fmt(r.slack_used)]
                + [fmt(x) for x in r.lower]
                + [fmt(x) for x in r.upper]
                + [fmt(x) for x in r.observed]
                + [r.in_sample_covered, r.n_in_sample, int(r.infeasible), int(r.failed)]
            )


def is_covered(observed, lower, upper, tol: float = COVER_TOL) -> bool:
    o = np.asarray(observed, dtype=float)
    return bool(np.all(o >= np.asarray(lower) - tol) and np.all(o <= np.asarray(upper) + tol))


def realize_dispatch(
    system: PowerSystem,
    sf: ShiftFactorMatrix,
    decision: DispatchDecision,
    observed,
    penalty_mode: str = "penalized",
    period: int = 0,
    method: str = "",
) -> PeriodResult:
    """Curtail each unit to its upper limit, then redispatch CCUs at least cost."""
    observed = np.asarray(observed, dtype=float)
    lower = np.asarray(decision.lower, dtype=float)
    upper = np.asarray(decision.upper, dtype=float)
    realized = np.minimum(observed, upper)
    penalty = "strict" if penalty_mode == "strict" else "default"
    corr = corrective_cost(system, sf, decision.base_obp, realized, penalty)
    infeasible = not np.isfinite(corr.cost)
    return PeriodResult(
        period=period,
        method=method,
        covered=is_covered(observed, lower, upper),
        wind_output_mw=float(realized.sum()),
        dispatch_cost=float(corr.cost),
        dne_width=upper - lower,
        lower=lower.copy(),
        upper=upper.copy(),
        observed=observed.copy(),
        realized_vrg=realized,
        base_obp=np.asarray(decision.base_obp, dtype=float).copy(),
        corrective=corr.outputs,
        slack_used=0.0 if infeasible else corr.slack_used,
        infeasible=infeasible,
    )


def next_state(system: PowerSystem, result: PeriodResult) -> np.ndarray:
    """Unit outputs that seed the next period's ramp window: realized
    corrective output for CCUs, the base point for NCCUs."""
    p0 = result.base_obp.copy()
    if not result.infeasible:
        p0[system.ccu] = result.corrective
    return p0


_RECOVERABLE = (DneInfeasible, ObpInfeasible, EdInfeasible, CcgNotConverged, SolverError)


def _decide_proposed(system, sf, hist, f, config, s_dne):
    s_obp = select_samples(hist, f, config.n_obp, system.vrg_capacity)
    dne = solve_dne(
        system,
        sf,
        s_dne,
        f,
        DneConfig(epsilon=config.epsilon, formulation=config.formulation, backend=config.backend),
    )
    obp = solve_obp(
        system, sf, s_obp, f, dne.lower, dne.upper, ObpConfig(epsilon=config.epsilon, backend=config.backend)
    )
    return DispatchDecision(obp.base_obp, dne.lower, dne.upper), dne.solve_seconds, obp.solve_seconds, ""


def _decide_odne(system, sf, hist, f, config, s_dne):
    t0 = time.perf_counter()
    ed = solve_ed(system, sf, f)
    t_ed = time.perf_counter() - t0
    od = solve_odne(system, sf, ed, OdneConfig(epsilon=config.epsilon, backend=config.backend))
    note = "odne fallback: zero-width limits" if od.fallback else ""
    return DispatchDecision(ed.obp, od.lower, od.upper), od.solve_seconds, t_ed, note


def run_simulation(
    system: PowerSystem,
    history,
    validation_series,
    config: SimulationConfig | None = None,
    progress=None,
) -> SimReport:
    """Simulate the configured method over the horizon, one period at a time.

    ``progress`` (optional) is called with each finished :class:`PeriodResult`.
    """
    config = config or SimulationConfig()
    validation = list(validation_series)
    horizon = list(range(len(validation))) if config.horizon is None else list(config.horizon)
    for t in horizon:
        if not 0 <= t < len(validation):
            raise ValueError(f"horizon index {t} outside the validation series")
        if validation[t].observed is None:
            raise ValueError(f"validation period {t} has no observed output")
    hist_all = history if isinstance(history, History) else History(history)
    sf = compute_shift_factors(system)
    cap = system.vrg_capacity
    decide = _decide_proposed if config.method == "proposed" else _decide_odne
    report = SimReport(config.method)
    state = system
    previous: DispatchDecision | None = None
    for t in horizon:
        rec: HistoryRecord = validation[t]
        hist = hist_all.before(rec.timestamp)
        f = np.clip(np.asarray(rec.forecast, dtype=float), 0.0, cap)
        observed = np.clip(np.asarray(rec.observed, dtype=float), 0.0, cap)
        s_dne = select_samples(hist, f, config.n_dne, cap)
        try:
            decision, cpu_a, cpu_b, note = decide(state, sf, hist, f, config, s_dne)
            failed = False
        except _RECOVERABLE as exc:
            log.warning("period %d (%s): %s", t, config.method, exc)
            decision = previous or DispatchDecision(state.p_current, f.copy(), f.copy())
            cpu_a = cpu_b = 0.0
            note, failed = f"{type(exc).__name__}: {exc}", True
        result = realize_dispatch(state, sf, decision, observed, config.penalty_mode, t, config.method)
        result.cpu_dne_s, result.cpu_obp_s = cpu_a, cpu_b
        result.in_sample_covered = coverage_count(s_dne, decision.lower, decision.upper)
        result.n_in_sample = len(s_dne)
        result.failed, result.message = failed, note
        report.per_period.append(result)
        if progress is not None:
            progress(result)
        previous = decision
        state = state.with_p_current(next_state(state, result))
    return report
