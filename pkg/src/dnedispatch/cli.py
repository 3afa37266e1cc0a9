"""``dispatch`` command-line entry point.

Exit status: 0 on success, 1 on a runtime failure, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baseline import solve_ed, solve_odne
from .dne import DneConfig, coverage_count, solve_dne
from .model import CaseError, PowerSystem, bundled_case_path, compute_shift_factors, load_case
from .obp import ObpConfig, solve_obp
from .sampling import History, read_wind_csv, select_samples, write_wind_csv
from .sim import SimulationConfig, run_simulation
from .synthetic import WindModel, generate_wind

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    case_path: str
    history_path: str
    validation_path: str
    output_dir: str = "out"
    config: dict = field(default_factory=dict)
    rng_seed: int | None = None

    @classmethod
    def from_file(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {"case_path", "history_path", "validation_path", "output_dir", "config", "rng_seed"}
        extra = set(data) - known
        if extra:
            raise UsageError(f"manifest: unknown key(s) {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise UsageError(f"manifest: {exc}") from exc


def _resolve_case(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    bundled = bundled_case_path(name)
    if bundled.exists():
        return bundled
    raise UsageError(f"case {name!r} is neither a file nor a bundled case")


def _existing(path, what: str) -> Path:
    if path is None:
        raise UsageError(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} file {str(p)!r} does not exist")
    return p


def _penalty(args):
    if getattr(args, "strict", False):
        return "strict"
    return "default" if args.penalty is None else args.penalty


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _single_period(args) -> tuple[PowerSystem, object, History, np.ndarray]:
    system = load_case(_resolve_case(args.case))
    ids = [v.id for v in system.vrg_units]
    history = History(read_wind_csv(_existing(args.history, "history"), ids))
    validation = read_wind_csv(_existing(args.validation, "validation"), ids)
    if not 0 <= args.period < len(validation):
        raise UsageError(f"--period {args.period} outside the validation series (0..{len(validation) - 1})")
    rec = validation[args.period]
    forecast = np.clip(rec.forecast, 0.0, system.vrg_capacity)
    return system, compute_shift_factors(system), history.before(rec.timestamp), forecast


def _write_json(path: Path, record: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")


def cmd_dne(args) -> int:
    system, sf, history, forecast = _single_period(args)
    samples = select_samples(history, forecast, args.n_dne, system.vrg_capacity)
    lp_text: list[str] | None = [] if args.emit_lp else None
    dec = solve_dne(system, sf, samples, forecast, DneConfig(epsilon=args.epsilon, formulation=args.formulation), lp_text)
    out = Path(args.out)
    record = {"period": args.period, "vrg": [v.id for v in system.vrg_units], "n_samples": len(samples), **dec.to_record()}
    _write_json(out / "dne.json", record)
    if lp_text:
        (out / "dne.lp").write_text(lp_text[-1], encoding="utf-8")
    print(f"coverage {dec.coverage_count}/{len(samples)}")
    for v, lo, hi in zip(system.vrg_units, dec.lower, dec.upper):
        print(f"{v.id}: [{lo:.4f}, {hi:.4f}] MW")
    return EXIT_OK


def cmd_obp(args) -> int:
    system, sf, history, forecast = _single_period(args)
    if args.limits:
        limits = json.loads(_existing(args.limits, "limits").read_text(encoding="utf-8"))
        lower, upper = np.asarray(limits["lower"], float), np.asarray(limits["upper"], float)
    else:
        s_dne = select_samples(history, forecast, args.n_dne, system.vrg_capacity)
        dec = solve_dne(system, sf, s_dne, forecast, DneConfig(epsilon=args.epsilon))
        lower, upper = dec.lower, dec.upper
    samples = select_samples(history, forecast, args.n_obp, system.vrg_capacity)
    obp = solve_obp(system, sf, samples, forecast, lower, upper, ObpConfig(epsilon=args.epsilon, penalty=_penalty(args)))
    record = {
        "period": args.period,
        "units": [g.id for g in system.conventional_units],
        "lower": [float(x) for x in lower],
        "upper": [float(x) for x in upper],
        **obp.to_record(),
    }
    _write_json(Path(args.out) / "obp.json", record)
    for g, p in zip(system.conventional_units, obp.base_obp):
        print(f"{g.id}: {p:.4f} MW")
    print(f"expected cost {obp.expected_cost:.4f} $/h")
    return EXIT_OK


def _manifest_from_args(args) -> RunManifest:
    if args.manifest:
        m = RunManifest.from_file(_existing(args.manifest, "manifest"))
    else:
        m = RunManifest(args.case, args.history, args.validation, args.out)
    # explicit flags override the manifest
    for key in ("n_dne", "n_obp", "epsilon"):
        if getattr(args, key) is not None:
            m.config[key] = getattr(args, key)
    if getattr(args, "method", None):
        m.config["method"] = args.method
    if args.strict:
        m.config["penalty_mode"] = "strict"
    if args.periods is not None:
        m.config["horizon"] = list(range(args.periods))
    if args.out_given:
        m.output_dir = args.out
    return m


def _load_run(m: RunManifest):
    if m.case_path is None:
        raise UsageError("--case is required")
    system = load_case(_resolve_case(m.case_path))
    ids = [v.id for v in system.vrg_units]
    history = read_wind_csv(_existing(m.history_path, "history"), ids)
    validation = read_wind_csv(_existing(m.validation_path, "validation"), ids)
    return system, history, validation


def _config(base: dict, **override) -> SimulationConfig:
    try:
        return SimulationConfig(**{**base, **override})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"configuration: {exc}") from exc


def _progress(quiet: bool):
    if quiet:
        return None

    def show(r):
        print(f"period {r.period:4d} {r.method:8s} covered={int(r.covered)} wind={r.wind_output_mw:9.3f} cost={r.dispatch_cost:11.3f}")

    return show


def cmd_run(args) -> int:
    m = _manifest_from_args(args)
    system, history, validation = _load_run(m)
    config = _config(m.config)
    report = run_simulation(system, history, validation, config, _progress(args.quiet))
    report.write(m.output_dir, [v.id for v in system.vrg_units])
    print(json.dumps(report.summary(), indent=2))
    return EXIT_OK


def cmd_compare(args) -> int:
    m = _manifest_from_args(args)
    m.config.pop("method", None)
    system, history, validation = _load_run(m)
    ids = [v.id for v in system.vrg_units]
    reports = {}
    for method in ("proposed", "odne"):
        report = run_simulation(system, history, validation, _config(m.config, method=method), _progress(args.quiet))
        report.write(Path(m.output_dir) / method, ids)
        reports[method] = report
    prop, base = reports["proposed"], reports["odne"]
    dominance = all(a.in_sample_covered >= b.in_sample_covered for a, b in zip(prop.per_period, base.per_period))
    summary = {
        "proposed": prop.summary(),
        "odne": base.summary(),
        "coverage_rate_margin": prop.coverage_rate - base.coverage_rate,
        "in_sample_dominance": dominance,
        "wind_dominance": prop.total_wind >= base.total_wind - 1e-6,
    }
    _write_json(Path(m.output_dir) / "summary.json", summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    system = load_case(_resolve_case(args.case))
    model = WindModel(ar=args.ar, error_base=args.error_base, error_slope=args.noise_scale)
    history, validation = generate_wind(system.vrg_capacity, args.n_history, args.n_validation, args.seed, model)
    ids = [v.id for v in system.vrg_units]
    out = Path(args.out)
    write_wind_csv(out / "history.csv", ids, history)
    write_wind_csv(out / "validation.csv", ids, validation, with_observed=True)
    print(f"wrote {len(history)} history and {len(validation)} validation records to {out}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, samples: bool = True) -> None:
    p.add_argument("--case", help="case JSON path or bundled case name (smoke3, six_bus, twenty_bus)")
    p.add_argument("--history", help="history CSV")
    p.add_argument("--validation", help="validation CSV (forecast, error, observed)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--epsilon", type=_positive_float, default=None, help="C&CG tolerance in MW (default 1e-4)")
    pen = p.add_mutually_exclusive_group()
    pen.add_argument("--penalty", type=_positive_float, default=None, help="slack price in $/MWh")
    pen.add_argument("--strict", action="store_true", help="hard balance and line rows in corrective dispatch")
    if samples:
        p.add_argument("--n-dne", "--samples", dest="n_dne", type=_positive_int, default=None)
        p.add_argument("--n-obp", dest="n_obp", type=_positive_int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dispatch", description="Real-time dispatch with do-not-exceed limits for wind.", epilog="exit status: 0 ok, 1 runtime failure, 2 usage error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dne", help="DNE limits for one period")
    _add_common(p)
    p.add_argument("--period", type=int, default=0, help="row of the validation series")
    p.add_argument("--formulation", choices=("dne2", "dne3"), default="dne3")
    p.add_argument("--emit-lp", action="store_true", help="also write the master MILP as dne.lp")
    p.set_defaults(func=cmd_dne)

    p = sub.add_parser("obp", help="operating base points for one period")
    _add_common(p)
    p.add_argument("--period", type=int, default=0)
    p.add_argument("--limits", help="dne.json whose lower/upper are used (otherwise solved first)")
    p.set_defaults(func=cmd_obp)

    for name, func in (("run", cmd_run), ("compare", cmd_compare)):
        p = sub.add_parser(name, help="receding-horizon simulation" if name == "run" else "paired run of both methods")
        _add_common(p)
        if name == "run":
            p.add_argument("--method", choices=("proposed", "odne"), default=None)
        p.add_argument("--manifest", help="RunManifest JSON")
        p.add_argument("--periods", type=_positive_int, default=None, help="simulate only the first N validation periods")
        p.add_argument("--quiet", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("gen-synthetic", help="write synthetic history.csv and validation.csv")
    p.add_argument("--case", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--n-history", type=_positive_int, default=8760)
    p.add_argument("--n-validation", type=_positive_int, default=240)
    p.add_argument("--ar", type=float, default=WindModel.ar, help="AR(1) coefficient of the forecast process")
    p.add_argument("--noise-scale", type=float, default=WindModel.error_slope, help="error std growth per unit forecast/capacity")
    p.add_argument("--error-base", type=float, default=WindModel.error_base, help="error std at zero forecast, per unit capacity")
    p.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.out_given = args.out is not None
    if args.out is None:
        args.out = "out"
    for key in ("n_dne", "n_obp", "epsilon"):
        if hasattr(args, key) and args.command in ("dne", "obp") and getattr(args, key) is None:
            setattr(args, key, {"n_dne": 400, "n_obp": 20, "epsilon": 1e-4}[key])
    if args.command == "gen-synthetic" and not 0 <= args.ar < 1:
        parser.error("--ar must lie in [0, 1)")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dispatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CaseError, ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"dispatch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
