"""Command-line front end: ``acc-codesign {analyze,allocate,schedule,cosim,compare}``.

Exit codes: 0 success / feasible, 1 the analysis ran but the verdict failed,
2 input or usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import acc, rt_kernel
from .model import Category, ModelError, TaskSet, errors_of, extract_task_set, instantiate, validate
from .parser import parse_file
from .schedulability import (OVERLOADED, allocate_unbound, best_fit_allocate, ll_feasible,
                             min_feasible_period, simulate_schedule, utilization)

MODELS_DIR = Path(__file__).parent / "models"
SHIPPED = {"single": MODELS_DIR / "acc_single.adl", "dual": MODELS_DIR / "acc_dual.adl"}
DEFAULT_MATRIX = (("single", (40, 80, 160)), ("dual", (20, 40, 80)))
REFERENCE_PERIOD_MS = 40

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- model loading -----------------------------------------------------------

def resolve_model_path(name) -> Path:
    """A path on disk, a shipped model file name, or ``single``/``dual``."""
    p = Path(name)
    if p.is_file():
        return p
    if str(name) in SHIPPED:
        return SHIPPED[str(name)]
    if not p.parent.parts and (MODELS_DIR / p.name).is_file():
        return MODELS_DIR / p.name
    raise UsageError(f"{name}: file not found")


def default_root(model) -> str:
    impls = list(model.impls().values())
    if not impls:
        raise UsageError("model has no component implementation to instantiate")
    systems = [i for i in impls if i.category is Category.SYSTEM]
    return (systems or impls)[-1].qualified_name


@dataclass
class LoadedModel:
    path: Path
    root: str
    task_set: TaskSet
    diagnostics: list = field(default_factory=list)


def load_model(name, root: Optional[str] = None, period_ms: Optional[float] = None) -> LoadedModel:
    path = resolve_model_path(name)
    model = parse_file(path)
    root = root or default_root(model)
    tree = instantiate(model, root)
    diags = validate(tree)
    errs = errors_of(diags)
    if errs:
        raise ModelError(errs)
    ts = extract_task_set(tree)
    if period_ms is not None:
        ts = rt_kernel.apply_period_override(ts, ms_to_us(period_ms))
    return LoadedModel(path, root, ts, diags)


def ms_to_us(ms: float) -> int:
    us = round(ms * 1000)
    if us <= 0:
        raise UsageError("period must be positive")
    return us


# -- output helpers ----------------------------------------------------------

def format_table(header, rows) -> str:
    cells = [[str(h) for h in header]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    lines = []
    for n, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if k == 0 else c.rjust(w)
                               for k, (c, w) in enumerate(zip(r, widths))).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _warn(diags):
    for d in diags:
        print(str(d), file=sys.stderr)


# -- analyze / allocate ------------------------------------------------------

def cmd_analyze(args) -> int:
    lm = load_model(args.model, args.root, args.period)
    _warn(lm.diagnostics)
    ts = lm.task_set
    allocation = None
    if not ts.all_bound:
        if not args.allocate:
            unbound = [t.name for t in ts if t.processor is None]
            raise UsageError(f"unbound thread(s) {', '.join(unbound)}; use --allocate")
        ts, allocation = allocate_unbound(ts)
        if allocation.rejected:
            raise UsageError(f"allocation failed for {', '.join(allocation.rejected)}")
    verdicts = ll_feasible(ts)
    overloaded = any(v.status == OVERLOADED for v in verdicts)
    report = {
        "model": lm.path.name,
        "root": lm.root,
        "period_ms": args.period,
        "processors": [v.as_dict() for v in verdicts],
        "min_feasible_period_ms": min_feasible_period(ts, ms_to_us(args.granularity)) / 1000,
        "feasible": not overloaded,
    }
    if allocation is not None:
        report["allocation"] = dict(allocation.binding)
    header = ("processor", "tasks", "utilization", "ll_bound", "verdict")
    rows = [(v.processor, v.n_tasks, f"{float(v.utilization) * 100:.1f}%", f"{v.ll_bound:.4f}",
             v.status) for v in verdicts]
    if args.format == "json":
        print(dump_json(report), end="")
    elif args.format == "csv":
        print(format_csv(header, rows), end="")
    else:
        print(format_table(header, rows), end="")
        print(f"minimum common period ({args.granularity:g} ms grid): "
              f"{report['min_feasible_period_ms']:g} ms")
        print("verdict:", "overloaded" if overloaded else "ok")
    if args.out:
        write_text(Path(args.out) / "analysis.json", dump_json(report))
    return EXIT_FAIL if overloaded else EXIT_OK


def cmd_allocate(args) -> int:
    lm = load_model(args.model, args.root, args.period)
    _warn(lm.diagnostics)
    ts = lm.task_set
    if args.all:
        result = best_fit_allocate(list(ts), ts.processors, use_bound=not args.no_bound)
        ts = result.apply(ts.with_tasks(replace(t, processor=None) for t in ts))
    else:
        ts, result = allocate_unbound(ts, use_bound=not args.no_bound)
    util = utilization(ts) if ts.all_bound else {}
    report = {
        "binding": {t.name: t.processor for t in ts},
        "rejected": list(result.rejected),
        "utilization": {p: float(u) for p, u in util.items()},
    }
    header = ("task", "processor")
    rows = [(t.name, t.processor) for t in ts] + [(name, "-") for name in result.rejected]
    if args.format == "json":
        print(dump_json(report), end="")
    elif args.format == "csv":
        print(format_csv(header, rows), end="")
    else:
        print(format_table(header, rows), end="")
        for p, u in util.items():
            print(f"{p}: {float(u) * 100:.1f}%")
        if result.rejected:
            print("rejected:", ", ".join(result.rejected))
    if args.out:
        write_text(Path(args.out) / "allocation.json", dump_json(report))
    return EXIT_FAIL if result.rejected else EXIT_OK


# -- schedule ----------------------------------------------------------------

def _bound_task_set(lm: LoadedModel, allocate: bool) -> TaskSet:
    ts = lm.task_set
    if ts.all_bound:
        return ts
    if not allocate:
        unbound = [t.name for t in ts if t.processor is None]
        raise UsageError(f"unbound thread(s) {', '.join(unbound)}; use --allocate")
    ts, res = allocate_unbound(ts)
    if res.rejected:
        raise UsageError(f"allocation failed for {', '.join(res.rejected)}")
    return ts


def cmd_schedule(args) -> int:
    lm = load_model(args.model, args.root, args.period)
    _warn(lm.diagnostics)
    ts = _bound_task_set(lm, args.allocate)
    horizon = None if args.horizon is None else round(args.horizon * 1000)
    if horizon is not None and horizon < 0:
        raise UsageError("horizon must be non-negative")
    trace = simulate_schedule(ts, horizon, overrun=args.overrun)
    summary = trace.summary()
    summary["horizon_us"] = trace.horizon
    summary["miss_count"] = len(trace.misses)
    if args.out:
        out = Path(args.out)
        write_text(out / "schedule.csv", trace.to_csv())
        write_text(out / "schedule_summary.json", dump_json(summary))
    if args.format == "json":
        print(dump_json(summary), end="")
    elif args.format == "csv":
        print(trace.to_csv(), end="")
    else:
        rows = [(m.task, m.job, m.release, m.deadline) for m in trace.misses]
        print(f"horizon: {trace.horizon} us, segments: {len(trace.segments)}, "
              f"misses: {len(trace.misses)}")
        if rows:
            print(format_table(("task", "job", "release_us", "deadline_us"), rows[:args.limit]), end="")
            if len(rows) > args.limit:
                print(f"... {len(rows) - args.limit} more")
    return EXIT_FAIL if trace.misses else EXIT_OK


# -- cosim -------------------------------------------------------------------

def _load_inputs(args):
    try:
        params = acc.load_params(args.params) if args.params else acc.ControllerParams()
        scenario = acc.load_scenario(args.scenario) if args.scenario else acc.standard_scenario()
    except FileNotFoundError as exc:
        raise UsageError(f"{exc.filename}: file not found") from None
    return params, scenario


def _horizon_us(args, scenario) -> int:
    if args.horizon is not None:
        h = round(args.horizon * 1000)
    else:
        h = round(scenario.duration * 1e6)
    if h < 0:
        raise UsageError("horizon must be non-negative")
    return h


def reference_run(task_set, params, scenario, horizon, period_ms=REFERENCE_PERIOD_MS):
    """The same controller with every task executing instantly at its release."""
    cfg = rt_kernel.SimConfig(horizon=horizon, period_override=ms_to_us(period_ms))
    return rt_kernel.run_instant(task_set, acc.bind_behaviors(task_set, params),
                                 acc.PointMassPlant(params), scenario, cfg)


def cosim_report(trace, task_set, params, reference=None) -> dict:
    req = acc.check_headway(trace, params) if len(trace) else None
    report = {
        "requirement": req.as_dict() if req else None,
        "verdict": req.verdict if req else "pass",
        "misses": len(trace.schedule.misses) if trace.schedule else 0,
        "utilization": {p: float(u) for p, u in utilization(task_set).items()},
        "period_ms": sorted({t.period / 1000 for t in task_set}),
    }
    try:
        report["latency"] = rt_kernel.sensor_to_actuator_latency(trace).as_dict()
    except ValueError:
        report["latency"] = None
    if reference is not None and len(reference):
        ref = acc.check_headway(reference, params)
        report["reference"] = {"min_margin_m": ref.min_margin, "verdict": ref.verdict}
    return report


def run_cosim_cell(model, period_ms, params, scenario, horizon, root=None, overrun="drop",
                   allocate=False):
    lm = load_model(model, root, period_ms)
    ts = _bound_task_set(lm, allocate)
    cfg = rt_kernel.SimConfig(horizon=horizon, overrun=overrun)
    trace = rt_kernel.run_cosim(ts, acc.bind_behaviors(ts, params), acc.PointMassPlant(params),
                                scenario, cfg)
    return lm, ts, trace


def cmd_cosim(args) -> int:
    params, scenario = _load_inputs(args)
    horizon = _horizon_us(args, scenario)
    lm, ts, trace = run_cosim_cell(args.model, args.period, params, scenario, horizon,
                                   args.root, args.overrun, args.allocate)
    _warn(lm.diagnostics)
    ref = None if args.no_reference else reference_run(ts, params, scenario, horizon)
    report = cosim_report(trace, ts, params, ref)
    report["model"] = lm.path.name
    if args.out:
        out = Path(args.out)
        write_text(out / "trajectory.csv", trace.to_csv())
        write_text(out / "schedule.csv", trace.schedule.to_csv())
        write_text(out / "report.json", dump_json(report))
        if args.svg:
            from .plot import trace_svg
            write_text(out / "trajectory.svg", trace_svg(trace, params, lm.path.stem))
    if args.format == "json":
        print(dump_json(report), end="")
    elif args.format == "csv":
        print(trace.to_csv(), end="")
    else:
        req = report["requirement"] or {}
        rows = [("verdict", report["verdict"]),
                ("min margin [m]", f"{req.get('min_margin_m', float('nan')):.3f}"),
                ("deadline misses", report["misses"])]
        if report.get("latency"):
            rows.append(("latency mean/max [ms]",
                         f"{report['latency']['mean_ms']:.1f}/{report['latency']['max_ms']:.1f}"))
        if "reference" in report:
            rows.append(("reference margin [m]", f"{report['reference']['min_margin_m']:.3f}"))
        print(format_table(("quantity", "value"), rows), end="")
    return EXIT_OK if report["verdict"] == "pass" else EXIT_FAIL


# -- compare -----------------------------------------------------------------

@dataclass(frozen=True)
class CompareRow:
    config: str
    cores: int
    period_ms: float
    utilizations: dict
    misses: int
    min_margin: float
    verdict: str

    @property
    def eligible(self) -> bool:
        return self.verdict == "pass" and self.misses == 0


@dataclass
class CompareMatrix:
    rows: list[CompareRow]

    HEADER = ("config", "cores", "period_ms", "utilizations", "misses", "min_margin_m", "verdict")

    def table_rows(self):
        return [(r.config, r.cores, f"{r.period_ms:g}",
                 ";".join(f"{p}={u:.4f}" for p, u in r.utilizations.items()),
                 r.misses, f"{r.min_margin:.6f}", r.verdict) for r in self.rows]

    def to_csv(self) -> str:
        return format_csv(self.HEADER, self.table_rows())

    @classmethod
    def from_csv(cls, text: str) -> "CompareMatrix":
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            util = {}
            for part in filter(None, rec["utilizations"].split(";")):
                p, _, u = part.partition("=")
                util[p] = float(u)
            rows.append(CompareRow(rec["config"], int(rec["cores"]), float(rec["period_ms"]),
                                   util, int(rec["misses"]), float(rec["min_margin_m"]),
                                   rec["verdict"]))
        return cls(rows)

    def recommend(self) -> Optional[CompareRow]:
        """Fewest cores first, then the largest margin, among rows that pass
        the requirement without deadline misses.  Ties keep matrix order."""
        ok = [r for r in self.rows if r.eligible]
        if not ok:
            return None
        return min(ok, key=lambda r: (r.cores, -r.min_margin))


def recommendation_line(best: Optional[CompareRow]) -> str:
    if best is None:
        return "recommendation: none (no configuration passes without deadline misses)"
    kind = {1: "single", 2: "dual"}.get(best.cores, f"{best.cores}")
    return f"recommendation: {kind}-core {best.period_ms:g} ms ({best.config})"


def parse_config(spec: str):
    """``name=40,80`` or ``path/to/model.adl=40,80``."""
    name, sep, periods = spec.rpartition("=")
    if not sep:
        raise UsageError(f"configuration {spec!r}: expected MODEL=P1,P2,...")
    values = [p.strip() for p in periods.split(",") if p.strip()]
    if not values:
        raise UsageError(f"configuration {spec!r}: empty period list")
    try:
        return name, tuple(float(v) for v in values)
    except ValueError:
        raise UsageError(f"configuration {spec!r}: bad period") from None


def _label(model) -> str:
    return model if model in SHIPPED else Path(model).stem


def _compare_cell(job):
    model, period, params, scenario, horizon, root, overrun, out, svg = job
    lm, ts, trace = run_cosim_cell(model, period, params, scenario, horizon, root, overrun)
    report = cosim_report(trace, ts, params)
    name = f"{_label(model)}/{period:g}ms"
    if out:
        cell = Path(out) / f"{_label(model)}_{period:g}ms"
        write_text(cell / "trajectory.csv", trace.to_csv())
        write_text(cell / "schedule.csv", trace.schedule.to_csv())
        write_text(cell / "report.json", dump_json(report))
        if svg:
            from .plot import trace_svg
            write_text(cell / "trajectory.svg", trace_svg(trace, params, name))
    req = report["requirement"] or {"min_margin_m": float("inf")}
    return CompareRow(name, len(ts.processors), period, report["utilization"], report["misses"],
                      req["min_margin_m"], report["verdict"])


def run_compare(configs, params, scenario, horizon, root=None, overrun="drop", out=None,
                svg=False, jobs=1) -> CompareMatrix:
    cells = [(m, p, params, scenario, horizon, root, overrun, out, svg)
             for m, periods in configs for p in periods]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_compare_cell, cells))
    else:
        rows = [_compare_cell(c) for c in cells]
    return CompareMatrix(rows)


def cmd_compare(args) -> int:
    params, scenario = _load_inputs(args)
    horizon = _horizon_us(args, scenario)
    configs = [parse_config(c) for c in args.configs] if args.configs else list(DEFAULT_MATRIX)
    for model, _ in configs:
        resolve_model_path(model)
    matrix = run_compare(configs, params, scenario, horizon, args.root, args.overrun,
                         args.out, args.svg, args.jobs)
    best = matrix.recommend()
    line = recommendation_line(best)
    if args.out:
        write_text(Path(args.out) / "compare.csv", matrix.to_csv())
        write_text(Path(args.out) / "recommendation.txt", line + "\n")
    if args.format == "json":
        print(dump_json({"rows": [dict(zip(CompareMatrix.HEADER, r)) for r in matrix.table_rows()],
                         "recommendation": best.config if best else None}), end="")
    elif args.format == "csv":
        print(matrix.to_csv(), end="")
        print(line)
    else:
        print(format_table(CompareMatrix.HEADER, matrix.table_rows()), end="")
        print(line)
    return EXIT_OK if best is not None else EXIT_FAIL


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="acc-codesign",
                                 description="Architecture-model scheduling analysis and ACC co-simulation.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("model", help="model file, shipped model name, or single/dual")
            p.add_argument("--root", help="implementation to instantiate (default: last system impl)")
        p.add_argument("--period", type=float, help="common period for every thread [ms]")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("table", "json", "csv"), default="table")

    p = sub.add_parser("analyze", help="utilization and Liu & Layland feasibility")
    common(p)
    p.add_argument("--allocate", action="store_true", help="best-fit unbound threads first")
    p.add_argument("--granularity", type=float, default=10.0,
                   help="grid for the minimum common period search [ms]")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("allocate", help="best-fit decreasing allocation")
    common(p)
    p.add_argument("--all", action="store_true", help="ignore existing bindings")
    p.add_argument("--no-bound", action="store_true", help="fill up to 100%% instead of the bound")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("schedule", help="simulate the schedule and export a Gantt CSV")
    common(p)
    p.add_argument("--horizon", type=float, help="simulated time [ms] (default: hyperperiod)")
    p.add_argument("--allocate", action="store_true")
    p.add_argument("--overrun", choices=("drop", "queue"), default="drop")
    p.add_argument("--limit", type=int, default=20, help="misses listed in table output")
    p.set_defaults(func=cmd_schedule)

    def sim_opts(p):
        p.add_argument("--scenario", help="key = value scenario file")
        p.add_argument("--params", help="key = value controller parameter file")
        p.add_argument("--horizon", type=float, help="simulated time [ms] (default: scenario duration)")
        p.add_argument("--svg", action="store_true", help="also write an SVG plot")
        p.add_argument("--overrun", choices=("drop", "queue"), default="drop")

    p = sub.add_parser("cosim", help="co-simulate the controller on the scheduled platform")
    common(p)
    sim_opts(p)
    p.add_argument("--allocate", action="store_true")
    p.add_argument("--no-reference", action="store_true", help="skip the instant-execution run")
    p.set_defaults(func=cmd_cosim)

    p = sub.add_parser("compare", help="co-simulate a matrix of platforms and periods")
    p.add_argument("configs", nargs="*", metavar="MODEL=P1,P2",
                   help="default: single=40,80,160 dual=20,40,80")
    p.add_argument("--root")
    p.add_argument("--out")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sim_opts(p)
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except ModelError as exc:
        for d in exc.diagnostics:
            where = getattr(args, "model", None)
            print(f"{where}:{d}" if where else str(d), file=sys.stderr)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
