"""Historical wind records and nearest-forecast sample selection."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class HistoryRecord:
    timestamp: int
    forecast: np.ndarray
    error: np.ndarray
    observed: np.ndarray | None = None


@dataclass(frozen=True)
class SampleSet:
    indices: tuple[int, ...]
    errors: np.ndarray  # (n_samples, n_vrg)
    origin_forecast: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def realized(self) -> np.ndarray:
        return self.origin_forecast[None, :] + self.errors


@dataclass(frozen=True)
class SelectionConfig:
    n_dne: int = 400
    n_obp: int = 20
    clip_to_capacity: bool = True

    def __post_init__(self):
        if self.n_dne < 1 or self.n_obp < 1:
            raise ValueError("sample counts must be at least 1")


class History:
    """Immutable array view over a list of records."""

    def __init__(self, records):
        records = list(records)
        if not records:
            raise ValueError("history is empty")
        self.records = tuple(records)
        self.timestamps = np.array([r.timestamp for r in records], dtype=np.int64)
        self.forecasts = np.vstack([r.forecast for r in records]).astype(float)
        self.errors = np.vstack([r.error for r in records]).astype(float)
        if self.forecasts.shape != self.errors.shape:
            raise ValueError("forecast and error vectors differ in length")

    def __len__(self) -> int:
        return len(self.records)

    def before(self, timestamp: int) -> "History":
        return History([r for r in self.records if r.timestamp < timestamp])


def select_samples(history, upcoming_forecast, n: int, capacities=None) -> SampleSet:
    """The ``min(n, len(history))`` records whose forecasts are nearest
    (Euclidean) to ``upcoming_forecast``; ties go to the earlier timestamp.

    With ``capacities`` given, the returned errors are clipped so that
    ``forecast + error`` lies in ``[0, capacity]``.
    """
    if not isinstance(history, History):
        history = History(history)
    if n < 1:
        raise ValueError("n must be at least 1")
    f = np.asarray(upcoming_forecast, dtype=float)
    if history.forecasts.shape[1] != f.shape[0]:
        raise ValueError(
            f"dimension mismatch: records have {history.forecasts.shape[1]} VRG entries, forecast has {f.shape[0]}"
        )
    dist = np.sqrt(((history.forecasts - f) ** 2).sum(axis=1))
    order = np.lexsort((history.timestamps, dist))[: min(n, len(history))]
    errors = history.errors[order]
    if capacities is not None:
        errors = np.vstack([clip_error(e, f, capacities) for e in errors])
    return SampleSet(tuple(int(history.timestamps[k]) for k in order), errors, f.copy())


def clip_error(error, upcoming_forecast, capacities) -> np.ndarray:
    """Error adjusted so that ``forecast + error`` lies within ``[0, capacity]``."""
    f = np.asarray(upcoming_forecast, dtype=float)
    return np.clip(f + np.asarray(error, dtype=float), 0.0, np.asarray(capacities, dtype=float)) - f


def clip_sample(record: HistoryRecord, upcoming_forecast, capacities) -> np.ndarray:
    return clip_error(record.error, upcoming_forecast, capacities)


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------
def read_wind_csv(path, vrg_ids) -> list[HistoryRecord]:
    """Read a history (or validation) CSV.

    Columns: ``timestamp``, ``forecast_<id>``..., ``error_<id>``... and, for
    validation series, ``observed_<id>``....
    """
    vrg_ids = list(vrg_ids)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        need = ["timestamp"] + [f"forecast_{v}" for v in vrg_ids] + [f"error_{v}" for v in vrg_ids]
        missing = [c for c in need if c not in header]
        if missing:
            raise ValueError(f"{path}: missing column(s) {missing}")
        has_obs = all(f"observed_{v}" in header for v in vrg_ids)
        records = []
        for row in reader:
            obs = np.array([float(row[f"observed_{v}"]) for v in vrg_ids]) if has_obs else None
            records.append(
                HistoryRecord(
                    int(row["timestamp"]),
                    np.array([float(row[f"forecast_{v}"]) for v in vrg_ids]),
                    np.array([float(row[f"error_{v}"]) for v in vrg_ids]),
                    obs,
                )
            )
    return records


def write_wind_csv(path, vrg_ids, records, with_observed: bool = False) -> None:
    vrg_ids = list(vrg_ids)
    header = ["timestamp"] + [f"forecast_{v}" for v in vrg_ids] + [f"error_{v}" for v in vrg_ids]
    if with_observed:
        header += [f"observed_{v}" for v in vrg_ids]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in records:
            row = [r.timestamp] + [f"{x:.6f}" for x in r.forecast] + [f"{x:.6f}" for x in r.error]
            if with_observed:
                row += [f"{x:.6f}" for x in r.observed]
            writer.writerow(row)
