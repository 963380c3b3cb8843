"""Command-line front end: scenarios, parameter sweeps and metric checks.

Exit codes: 0 on success, 1 on usage or precondition errors, 2 when a run
contradicts an inequality that must hold or a metric check fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import experiments, geometry
from .dynamics import EngineConfig, EngineError
from .experiments import LengthReport, PhysicsViolation
from .model import QubitFamily, QutritFamily, ShiftedOscillatorFamily, SqueezedOscillatorFamily

log = logging.getLogger("geoqsl")

SCENARIOS = ("ho-linear", "qubit-circle", "squeezed-circle", "qutrit-linear", "qubit-adiabatic")
SWEEPABLE = {
    "s": "s",
    "lambda_star": "lambda_star",
    "lambda*": "lambda_star",
    "theta": "theta",
    "r": "r",
    "total_time": "total_time",
}
# parameters each scenario understands (beyond engine settings)
SCENARIO_PARAMS = {
    "ho-linear": {"omega"},
    "qubit-circle": {"omega", "theta", "s", "T", "omega_convention"},
    "squeezed-circle": {"omega", "r", "s", "T", "fock_check"},
    "qutrit-linear": {"omega", "a", "lambda_star"},
    "qubit-adiabatic": {"omega", "theta", "total_time", "omega_convention", "profile"},
}
QGT_FAMILIES = ("coherent", "qubit", "squeezed", "qutrit")
QGT_TOL = 1e-6
OUTPUT_KEYS = ("out", "format", "jobs")


class UsageError(ValueError):
    """Invalid command line or configuration."""


@dataclass
class RunConfig:
    """Everything needed to reproduce a run.

    ``None`` means "use the scenario default". ``T`` may be a number or
    ``"auto"`` (solve for the hold time).
    """

    scenario: str | None = None
    omega: float | None = None
    theta: float | None = None
    s: float | None = None
    T: float | str | None = None
    r: float | None = None
    a: float | None = None
    lambda_star: float | None = None
    total_time: float | None = None
    omega_convention: str | None = None
    profile: str | None = None
    fock_check: bool | None = None
    rtol: float | None = None
    min_steps: int | None = None
    convention: str = "fs"
    out: str = "."
    format: str = "json"
    jobs: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def merged(self, overrides: dict) -> "RunConfig":
        data = asdict(self)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(data)

    def echo(self) -> dict:
        """Run-defining keys, as stored in the report."""
        return {k: v for k, v in asdict(self).items() if k not in OUTPUT_KEYS}

    def validate(self) -> None:
        if self.scenario is not None and self.scenario not in SCENARIOS:
            raise UsageError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.format not in ("json", "csv"):
            raise UsageError("format must be json or csv")
        if self.convention not in ("fs", "lambda-plane"):
            raise UsageError("convention must be fs or lambda-plane")
        if self.convention == "lambda-plane" and self.scenario not in (None, "ho-linear"):
            raise UsageError("the lambda-plane convention applies to ho-linear only")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise UsageError("jobs must be a positive integer")
        if isinstance(self.T, str) and self.T != "auto":
            raise UsageError("T must be a positive number or 'auto'")
        for name in ("omega", "theta", "s", "r", "a", "lambda_star", "total_time", "rtol"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v)):
                raise UsageError(f"{name} must be a finite number")
        if self.T is not None and not isinstance(self.T, str):
            if isinstance(self.T, bool) or not isinstance(self.T, (int, float)) or not self.T > 0:
                raise UsageError("T must be a positive number or 'auto'")
        if self.scenario is not None:
            allowed = SCENARIO_PARAMS[self.scenario]
            for name in ("omega", "theta", "s", "T", "r", "a", "lambda_star", "total_time",
                         "omega_convention", "profile", "fock_check"):
                if getattr(self, name) is not None and name not in allowed:
                    raise UsageError(f"parameter {name} does not apply to {self.scenario}")


def _engine(cfg: RunConfig) -> EngineConfig | None:
    if cfg.rtol is None and cfg.min_steps is None:
        return None
    kw = {}
    if cfg.rtol is not None:
        kw["rtol"] = cfg.rtol
    if cfg.min_steps is not None:
        kw["min_steps"] = cfg.min_steps
    return EngineConfig(**kw)


def run_config(cfg: RunConfig) -> LengthReport:
    """Execute the scenario described by ``cfg``."""
    cfg.validate()
    if cfg.scenario is None:
        raise UsageError("no scenario given")
    kw = {k: getattr(cfg, k) for k in SCENARIO_PARAMS[cfg.scenario] if getattr(cfg, k) is not None}
    if kw.get("T") == "auto":
        kw["T"] = None
    engine = _engine(cfg)
    runner = {
        "ho-linear": experiments.run_ho_linear,
        "qubit-circle": experiments.run_qubit,
        "squeezed-circle": experiments.run_squeezed,
        "qutrit-linear": experiments.run_qutrit,
        "qubit-adiabatic": experiments.run_qubit_adiabatic,
    }[cfg.scenario]
    report = runner(**kw, config=engine)
    if cfg.convention == "lambda-plane":
        scale = math.sqrt(2.0)
        for name in ("l_E", "l_g_control", "l_g_hamiltonian_path", "d_lower"):
            setattr(report, name, getattr(report, name) * scale)
        report.notes.append("lengths in lambda-plane units (Fubini-Study lengths times sqrt(2))")
    report.config = cfg.echo()
    return report


def _report_row(report: dict) -> dict:
    row = {}
    for key, value in report.items():
        if key == "config":
            continue
        if key == "notes":
            row["notes"] = "; ".join(value)
        elif key == "extras":
            for ek, ev in value.items():
                if isinstance(ev, (int, float, bool, str)) or ev is None:
                    row[f"extras.{ek}"] = ev
        else:
            row[key] = value
    return row


def _fmt(value) -> str:
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_dict_rows(path: Path, rows: list[dict], lead: list[str]) -> None:
    keys = sorted({k for row in rows for k in row} - set(lead))
    header = lead + keys
    write_csv(path, header, ([row.get(k) for k in header] for row in rows))


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_scenario(cfg: RunConfig) -> int:
    report = run_config(cfg)
    out = _out_dir(cfg)
    stem = cfg.scenario
    data = report.to_dict()
    if cfg.format == "json":
        (out / f"{stem}.json").write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    else:
        _write_dict_rows(out / f"{stem}.csv", [_report_row(data)], ["scenario"])
    if report.trajectory is not None:
        header, table = report.trajectory.to_rows()
        write_csv(out / f"{stem}_trajectory.csv", header, table.tolist())
    print(
        f"{stem}: l_E={report.l_E:.10g} l_g={report.l_g_control:.10g} d_lower={report.d_lower:.10g} "
        f"fidelity={report.final_fidelity:.12g} conjecture_violated={report.original_conjecture_violated} "
        f"modified_holds={report.modified_inequality_holds}"
    )
    return 0


def _qgt_points(family_name: str, n: int, r_max: float):
    """Family instance and grid of control points for the metric check."""
    if family_name == "coherent":
        fam = ShiftedOscillatorFamily(1.0)
        axis = np.linspace(-2.0, 2.0, n)
        pts = [(x, y) for x in axis for y in axis]
    elif family_name == "qubit":
        fam = QubitFamily(1.0)
        pts = [(t, p) for t in np.linspace(0.0, np.pi, n) for p in np.linspace(0.0, 2 * np.pi, n, endpoint=False)]
    elif family_name == "squeezed":
        fam = SqueezedOscillatorFamily(1.0)
        pts = [(r, t) for r in np.linspace(0.0, r_max, n) for t in np.linspace(0.0, 2 * np.pi, n, endpoint=False)]
    else:
        fam = QutritFamily(2.0, 1.0)
        pts = [(lam,) for lam in np.linspace(-2.0, 2.0, n)]
    return fam, pts


def qgt_check(family_name: str, n: int, r_max: float = 2.0, step: float = 1e-4) -> list[dict]:
    """Per-point ``max |g_fd - g_analytic|`` on a grid."""
    fam, pts = _qgt_points(family_name, n, r_max)
    rows = []
    for pt in pts:
        row = {"family": family_name, "point": " ".join(f"{c:.17g}" for c in pt)}
        if family_name == "qubit" and abs(np.sin(pt[0])) < 2 * step:
            row.update(max_deviation=None, status="skipped", note="pole: azimuthal direction is degenerate")
        elif family_name == "squeezed" and pt[0] < 2 * step:
            row.update(max_deviation=None, status="skipped", note="origin: angular direction is degenerate")
        else:
            dev = float(np.max(np.abs(geometry.qgt_finite_difference(fam, pt, step=step).real
                                      - geometry.analytic_metric(fam, pt))))
            row.update(max_deviation=dev, status="ok" if dev <= QGT_TOL else "fail", note="")
        rows.append(row)
    return rows


def cmd_qgt_check(cfg: RunConfig, family_name: str, n: int, r_max: float) -> int:
    if family_name not in QGT_FAMILIES:
        raise UsageError(f"family must be one of {', '.join(QGT_FAMILIES)}")
    if n < 1:
        raise UsageError("grid must have at least one point per axis")
    if not 0 < r_max <= 3.0:
        raise UsageError("r-max must lie in (0, 3]")
    rows = qgt_check(family_name, n, r_max)
    out = _out_dir(cfg)
    if cfg.format == "json":
        (out / f"qgt_{family_name}.json").write_text(json.dumps(rows, indent=2) + "\n")
    else:
        _write_dict_rows(out / f"qgt_{family_name}.csv", rows, ["family", "point", "max_deviation", "status", "note"])
    devs = [r["max_deviation"] for r in rows if r["max_deviation"] is not None]
    skipped = sum(r["status"] == "skipped" for r in rows)
    worst = max(devs) if devs else 0.0
    print(f"qgt-check {family_name}: {len(devs)} points, max deviation {worst:.3e}, {skipped} skipped")
    for r in rows:
        if r["status"] == "skipped":
            print(f"  skipped {r['point']}: {r['note']}")
    return 2 if any(r["status"] == "fail" for r in rows) else 0


def _sweep_one(item: tuple[dict, str, float]) -> dict:
    base, param, value = item
    cfg = RunConfig.from_dict({**base, param: value})
    row = _report_row(run_config(cfg).to_dict())
    return {"parameter": param, "value": value, **row}


def sweep_values(start, stop, steps, values) -> list[float]:
    if values is not None:
        try:
            vals = [float(v) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"bad value list: {exc}") from exc
    else:
        if start is None or stop is None or steps is None:
            raise UsageError("give --values or all of --start, --stop, --steps")
        if steps < 1 or (steps > 1 and not stop > start) or (steps == 1 and start != stop):
            raise UsageError("invalid range: need stop > start and steps >= 1")
        vals = np.linspace(start, stop, steps).tolist()
    if not vals:
        raise UsageError("empty sweep range")
    return vals


def cmd_sweep(cfg: RunConfig, parameter: str, vals: list[float]) -> int:
    if parameter not in SWEEPABLE:
        raise UsageError(f"parameter must be one of {', '.join(sorted(SWEEPABLE))}")
    param = SWEEPABLE[parameter]
    cfg.validate()
    if cfg.scenario is None:
        raise UsageError("no scenario given")
    if param not in SCENARIO_PARAMS[cfg.scenario]:
        raise UsageError(f"{param} is not a parameter of {cfg.scenario}")
    base = cfg.echo()
    items = [(base, param, v) for v in vals]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_sweep_one, items))
    else:
        rows = [_sweep_one(it) for it in items]
    out = _out_dir(cfg)
    stem = f"sweep_{cfg.scenario}_{param}"
    if cfg.format == "json":
        (out / f"{stem}.json").write_text(json.dumps(rows, sort_keys=True, indent=2) + "\n")
    else:
        _write_dict_rows(out / f"{stem}.csv", rows, ["parameter", "value", "scenario", "l_E", "l_g_control", "d_lower"])
    for row in rows:
        print(f"{param}={row['value']:.10g}: l_E={row['l_E']:.10g} l_g={row['l_g_control']:.10g}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _t_value(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("T must be a number or 'auto'") from exc


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand from resetting a global flag given before it
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("output")
    g.add_argument("--out", help="output directory (default: current directory)")
    g.add_argument("--format", choices=("json", "csv"), help="report format (default: json)")
    g.add_argument("--jobs", type=int, help="worker processes for sweeps")
    g.add_argument("--config", help="JSON run configuration; flags override its values")

    physics = argparse.ArgumentParser(add_help=False)
    p = physics.add_argument_group("run parameters")
    p.add_argument("--omega", type=float)
    p.add_argument("--theta", type=float, help="polar angle of the qubit circle")
    p.add_argument("--s", type=float, help="ramp duration")
    p.add_argument("--T", type=_t_value, help="hold duration or 'auto'")
    p.add_argument("--r", type=float, help="squeezing radius")
    p.add_argument("--a", type=float, help="qutrit level asymmetry")
    p.add_argument("--lambda-star", dest="lambda_star", type=float)
    p.add_argument("--total-time", dest="total_time", type=float)
    p.add_argument("--omega-convention", dest="omega_convention", choices=("figure", "formula"))
    p.add_argument("--profile", choices=("linear", "smooth"))
    p.add_argument("--fock-check", dest="fock_check", action="store_const", const=True)
    p.add_argument("--rtol", type=float)
    p.add_argument("--min-steps", dest="min_steps", type=int)
    p.add_argument("--convention", choices=("fs", "lambda-plane"))

    parser = _Parser(prog="geoqsl", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sc = sub.add_parser("scenario", parents=[common, physics], help="run one preparation scenario")
    sc.add_argument("name", nargs="?", choices=SCENARIOS)

    qc = sub.add_parser("qgt-check", parents=[common], help="compare finite-difference and closed-form metrics")
    qc.add_argument("family", choices=QGT_FAMILIES)
    qc.add_argument("--grid", type=int, default=5, help="points per axis (default 5)")
    qc.add_argument("--r-max", dest="r_max", type=float, default=2.0, help="largest squeezing radius")

    sw = sub.add_parser("sweep", parents=[common, physics], help="scan one parameter of a scenario")
    sw.add_argument("name", nargs="?", choices=SCENARIOS)
    sw.add_argument("--parameter", required=True)
    sw.add_argument("--start", type=float)
    sw.add_argument("--stop", type=float)
    sw.add_argument("--steps", type=int)
    sw.add_argument("--values", help="comma-separated list instead of a range")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    overrides["scenario"] = getattr(args, "name", None)
    cfg = cfg.merged(overrides)
    cfg.validate()
    return cfg


def _setup_logging() -> None:
    level = os.environ.get("GEOQSL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "scenario":
            return cmd_scenario(cfg)
        if args.command == "qgt-check":
            return cmd_qgt_check(cfg, args.family, args.grid, args.r_max)
        vals = sweep_values(args.start, args.stop, args.steps, args.values)
        return cmd_sweep(cfg, args.parameter, vals)
    except (PhysicsViolation, EngineError) as exc:
        print(f"geoqsl: physics check failed: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"geoqsl: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
