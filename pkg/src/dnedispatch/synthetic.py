"""Synthetic wind histories and test networks.

Forecasts follow a bounded, spatially correlated AR(1) process; forecast
errors have a spread that grows with the forecast level.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .model import ConventionalUnit, CostCurve, Line, PowerSystem, VrgUnit
from .sampling import HistoryRecord


@dataclass(frozen=True)
class WindModel:
    ar: float = 0.9
    spatial_corr: float = 0.6
    level_lo: float = 0.05
    level_hi: float = 0.95
    error_base: float = 0.02  # error std as a fraction of capacity at zero forecast
    error_slope: float = 0.12  # additional std per unit of forecast/capacity
    error_corr: float = 0.5


def _correlated(rng, n: int, rho: float) -> np.ndarray:
    cov = np.full((n, n), rho) + (1.0 - rho) * np.eye(n)
    return rng.multivariate_normal(np.zeros(n), cov, method="cholesky")


def generate_wind(capacities, n_history: int, n_validation: int, seed: int, model: WindModel | None = None):
    """Return ``(history, validation)`` record lists with consecutive timestamps.

    Validation records carry ``observed = forecast + error``; every realized
    value lies in ``[0, capacity]``.
    """
    model = model or WindModel()
    cap = np.asarray(capacities, dtype=float)
    n = cap.size
    rng = np.random.default_rng(seed)
    latent = _correlated(rng, n, model.spatial_corr)
    innov = np.sqrt(1.0 - model.ar**2)
    records = []
    for t in range(n_history + n_validation):
        latent = model.ar * latent + innov * _correlated(rng, n, model.spatial_corr)
        level = model.level_lo + (model.level_hi - model.level_lo) * ndtr(latent)
        forecast = cap * level
        sd = cap * (model.error_base + model.error_slope * level)
        err = sd * _correlated(rng, n, model.error_corr)
        observed = np.clip(forecast + err, 0.0, cap)
        err = observed - forecast
        records.append(HistoryRecord(t, np.round(forecast, 6), np.round(err, 6), np.round(observed, 6)))
    history = [HistoryRecord(r.timestamp, r.forecast, r.error) for r in records[:n_history]]
    return history, records[n_history:]


def _cost(p_min: float, p_max: float, mc: float, steps: int = 2, rise: float = 0.15) -> CostCurve:
    bps = np.linspace(p_min, p_max, steps + 1)[1:]
    return CostCurve(tuple((float(b), round(mc * (1 + rise * k), 4)) for k, b in enumerate(bps)), round(mc * p_min * 0.5, 4))


def grid_case(n_bus: int = 20, n_units: int = 6, n_vrg: int = 4, seed: int = 7) -> PowerSystem:
    """Meshed test network: a ring with random chords, mixed CCU/NCCU fleet."""
    rng = np.random.default_rng(seed)
    buses = tuple(str(k + 1) for k in range(n_bus))
    edges = [(k, (k + 1) % n_bus) for k in range(n_bus)]
    while len(edges) < int(1.5 * n_bus):
        a, b = sorted(rng.choice(n_bus, size=2, replace=False))
        if (a, b) not in edges and (b, a) not in edges:
            edges.append((int(a), int(b)))
    loads = {b: float(round(rng.uniform(20, 60), 1)) for b in buses if rng.random() < 0.7}
    total_load = sum(loads.values())
    lines = tuple(
        Line(f"L{k + 1}", buses[a], buses[b], float(round(rng.uniform(0.05, 0.2), 4)), float(round(0.35 * total_load, 1)))
        for k, (a, b) in enumerate(edges)
    )
    unit_buses = rng.choice(n_bus, size=n_units, replace=False)
    units = []
    cap_each = 1.3 * total_load / n_units
    for k, b in enumerate(unit_buses):
        p_min = round(0.2 * cap_each, 1)
        p_max = round(cap_each, 1)
        mc = float(round(rng.uniform(12, 35), 2))
        cls = "CCU" if k % 2 == 0 else "NCCU"
        units.append(
            ConventionalUnit(
                id=f"G{k + 1}",
                bus=buses[b],
                control_class=cls,
                p_min=p_min,
                p_max=p_max,
                ramp=round(0.5 * cap_each, 1),
                corrective_adjust=round(0.12 * cap_each, 1) if cls == "CCU" else 0.0,
                cost=_cost(p_min, p_max, mc),
                p_current=round(0.5 * (p_min + p_max), 1),
            )
        )
    others = [k for k in range(n_bus) if k not in set(unit_buses)]
    vrg_buses = rng.choice(others, size=n_vrg, replace=False)
    vrg = tuple(VrgUnit(f"W{k + 1}", buses[b], round(0.12 * total_load, 1)) for k, b in enumerate(vrg_buses))
    return PowerSystem(
        buses=buses,
        lines=lines,
        conventional_units=tuple(units),
        vrg_units=vrg,
        loads=loads,
        slack_bus=buses[0],
        name=f"grid{n_bus}",
    )
