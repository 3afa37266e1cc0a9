"""Data-driven real-time dispatch with do-not-exceed (DNE) limits for
variable renewable generation."""
from .baseline import EdDecision, OdneDecision, solve_ed, solve_odne
from .dne import DneConfig, DneDecision, DneInfeasible, solve_dne
from .model import (
    ConventionalUnit,
    CostCurve,
    Line,
    PowerSystem,
    VrgUnit,
    compute_shift_factors,
    load_bundled_case,
    load_case,
)
from .obp import ObpConfig, ObpDecision, corrective_cost, solve_obp
from .robust import TwoStageProblem, enumerate_subproblem, run_ccg, solve_subproblem
from .sampling import History, HistoryRecord, SampleSet, select_samples
from .sim import SimReport, SimulationConfig, realize_dispatch, run_simulation

__version__ = "0.1.0"

__all__ = [
    "ConventionalUnit",
    "CostCurve",
    "DneConfig",
    "DneDecision",
    "DneInfeasible",
    "EdDecision",
    "History",
    "HistoryRecord",
    "Line",
    "ObpConfig",
    "ObpDecision",
    "OdneDecision",
    "PowerSystem",
    "SampleSet",
    "SimReport",
    "SimulationConfig",
    "TwoStageProblem",
    "VrgUnit",
    "compute_shift_factors",
    "corrective_cost",
    "enumerate_subproblem",
    "load_bundled_case",
    "load_case",
    "realize_dispatch",
    "run_ccg",
    "run_simulation",
    "select_samples",
    "solve_dne",
    "solve_ed",
    "solve_obp",
    "solve_odne",
    "solve_subproblem",
]
