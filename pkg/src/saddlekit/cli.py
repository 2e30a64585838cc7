"""Command-line experiment runner.

Subcommands::

    saddlekit run CONFIG
    saddlekit sweep CONFIG --param s --values 0.5,0.9,1.0
    saddlekit counterexample --algorithm arrow-hurwicz --s 1 --steps 6
    saddlekit ode-compare CONFIG

Exit status is 0 on success, 2 for an invalid configuration and 3 for a
numerical failure (divergence, singular system, non-convergent iteration).
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import export, ode, solvers
from .functions import FunctionError, UnsupportedOperation
from .linalg import LinalgError
from .plotting import PlotError, PlotSpec, emit_svg
from .problems import OracleError, ProblemError, problem_from_config, saddle_oracle

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "parse_config",
    "serialize",
    "run_experiment",
    "ode_compare",
    "main",
    "DIAGNOSTIC_FLAGS",
    "SEED_ENV",
]

DIAGNOSTIC_FLAGS = ("bounds", "lyapunov", "ne", "vi_gap")
SEED_ENV = "SADDLEKIT_SEED"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_OUTPUTS = {"csv": "trace.csv", "json": "report.json", "svg": None}
_KEYS = {"problem", "algorithm", "schedule", "x0", "y0", "iterations", "diagnostics",
         "outputs", "seed", "plot"}
_REQUIRED = {"problem", "algorithm", "schedule", "iterations"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    problem: dict
    algorithm: str
    schedule: dict
    x0: tuple
    y0: tuple
    iterations: int
    diagnostics: tuple = DIAGNOSTIC_FLAGS
    outputs: dict = field(default_factory=lambda: dict(DEFAULT_OUTPUTS))
    seed: int = 0
    plot: dict = None

    def to_dict(self):
        d = asdict(self)
        d["x0"], d["y0"], d["diagnostics"] = list(self.x0), list(self.y0), list(self.diagnostics)
        return d


def _schedule(d):
    if not isinstance(d, dict):
        raise ConfigError(f"schedule must be an object, got {d!r}")
    keys = set(d)
    if keys == {"s"}:
        return solvers.StepSchedule.from_s(_positive(d["s"], "s"))
    if keys == {"tau", "sigma"}:
        return solvers.StepSchedule.pair(_positive(d["tau"], "tau"), _positive(d["sigma"], "sigma"))
    raise ConfigError(
        f"schedule must be exactly {{'s'}} or {{'tau', 'sigma'}}, got keys {sorted(keys)}"
    )


def _positive(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not (np.isfinite(v) and v > 0):
        raise ConfigError(f"{name} must be a positive number, got {v!r}")
    return float(v)


def _vector(v, n, name):
    if v is None:
        return (0.0,) * n
    if not isinstance(v, list) or not all(
            isinstance(a, (int, float)) and not isinstance(a, bool) for a in v):
        raise ConfigError(f"{name} must be a list of numbers, got {v!r}")
    if len(v) != n:
        raise ConfigError(f"{name} has length {len(v)}; the problem needs {n}")
    return tuple(float(a) for a in v)


def _from_mapping(doc):
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = _REQUIRED - set(doc)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    algorithm = doc["algorithm"]
    if algorithm not in solvers.ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; expected one of {solvers.ALGORITHMS}")
    sched = _schedule(doc["schedule"])
    if algorithm == "pdhg" and not sched.single:
        raise ConfigError("pdhg takes schedule {'s'}; use general-pdhg for {'tau', 'sigma'}")
    it = doc["iterations"]
    if isinstance(it, bool) or not isinstance(it, int) or it < 0:
        raise ConfigError(f"iterations must be a nonnegative integer, got {it!r}")
    try:
        p = problem_from_config(doc["problem"])
    except (ProblemError, FunctionError, LinalgError, TypeError, KeyError, IndexError) as exc:
        raise ConfigError(f"invalid problem: {exc}") from None
    diag = doc.get("diagnostics", "all")
    if diag == "all":
        diag = DIAGNOSTIC_FLAGS
    if not isinstance(diag, (list, tuple)) or set(diag) - set(DIAGNOSTIC_FLAGS):
        raise ConfigError(f"diagnostics must be 'all' or a subset of {list(DIAGNOSTIC_FLAGS)}, "
                          f"got {diag!r}")
    outputs = doc.get("outputs", {})
    if not isinstance(outputs, dict) or set(outputs) - set(DEFAULT_OUTPUTS):
        raise ConfigError(f"outputs must be an object with keys among {sorted(DEFAULT_OUTPUTS)}")
    outputs = {**DEFAULT_OUTPUTS, **outputs}
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    plot = doc.get("plot")
    if plot is not None:
        try:
            PlotSpec(**plot)
        except (TypeError, PlotError) as exc:
            raise ConfigError(f"invalid plot: {exc}") from None
    return ExperimentSpec(
        problem=doc["problem"],
        algorithm=algorithm,
        schedule=sched.to_dict(),
        x0=_vector(doc.get("x0"), p.d1, "x0"),
        y0=_vector(doc.get("y0"), p.d2, "y0"),
        iterations=it,
        diagnostics=tuple(sorted(set(diag))),
        outputs=outputs,
        seed=seed,
        plot=plot,
    )


def parse_config(text):
    """Validate a JSON experiment document and fill defaults (seed 0, all diagnostics)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return _from_mapping(doc)


def serialize(spec):
    return json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n"


def _seed_override(spec):
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return spec
    try:
        return replace(spec, seed=int(env))
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _certificate(p):
    try:
        return saddle_oracle(p), None
    except (OracleError, UnsupportedOperation, LinalgError) as exc:
        return None, str(exc)


def _default_plot(p, cert, table):
    if p.d1 == 1 and p.d2 == 1:
        saddle = None if cert is None else (float(cert.x_star[0]), float(cert.y_star[0]))
        return PlotSpec("trajectory-2d", ("x_0", "y_0"), title="iterates", saddle=saddle)
    col = "ne" if np.sum(np.asarray(table["ne"]) > 0) >= 2 else "lyapunov_anchor"
    return PlotSpec("series-loglog", (col,), title=f"{col} per iteration")


def run_experiment(spec, out_dir="."):
    """Run one experiment and write its artifacts; returns a summary mapping.

    Output paths in ``spec.outputs`` are relative to ``out_dir``.
    """
    spec = _seed_override(spec)
    p = problem_from_config(spec.problem)
    sched = _schedule(spec.schedule)
    trace = solvers.run(p, spec.algorithm, sched, spec.x0, spec.y0, spec.iterations,
                        demonstration=spec.algorithm == "arrow-hurwicz", seed=spec.seed)
    cert, why = _certificate(p)
    bounds = "bounds" in spec.diagnostics and spec.algorithm != "arrow-hurwicz"
    report = dg.build_report(trace, p, sched, cert, checks=False)
    if bounds:
        report.bound_checks = dg.theorem_bound_check(trace, p, sched, cert, seed=spec.seed)
    nan = np.full(len(trace), np.nan)
    if "lyapunov" not in spec.diagnostics:
        report.lyapunov, report.lyapunov_anchor = nan.copy(), nan.copy()
    if "ne" not in spec.diagnostics:
        report.ne = np.full(len(report.ne), np.nan)
    if "vi_gap" not in spec.diagnostics:
        report.vi_gap = nan.copy()

    out = Path(out_dir)
    written = {}
    if spec.outputs.get("csv"):
        written["csv"] = export.atomic_write(out / spec.outputs["csv"], export.trace_csv(trace, report))
    extra = {
        "spec": spec.to_dict(),
        "certificate": None if cert is None else {
            "x_star": cert.x_star.tolist(), "y_star": cert.y_star.tolist(),
            "residual": cert.residual},
        "final": {"x": trace.xs[-1].tolist(), "y": trace.ys[-1].tolist()},
    }
    if cert is None:
        extra["certificate_note"] = why
    if spec.outputs.get("json"):
        written["json"] = export.atomic_write(out / spec.outputs["json"],
                                              export.report_json(report, trace, extra))
    if spec.outputs.get("svg"):
        table = export.trace_table(trace, report)
        plot = PlotSpec(**spec.plot) if spec.plot else _default_plot(p, cert, table)
        written["svg"] = emit_svg(table, plot, out / spec.outputs["svg"])
    failed = [c.theorem for c in report.bound_checks if not c.passed]
    return {"trace": trace, "report": report, "certificate": cert, "written": written,
            "failed_checks": failed}


def ode_compare(spec):
    """Maximum distance between PDHG iterates and implicit Euler steps of the matching ODE."""
    spec = _seed_override(spec)
    p = problem_from_config(spec.problem)
    sched = _schedule(spec.schedule)
    try:
        if sched.single:
            system = ode.high_res(p, sched.s)
            algorithm = "pdhg"
        else:
            system = ode.general_high_res(p, sched.tau, sched.sigma)
            algorithm = "general-pdhg"
    except ode.OdeError as exc:
        raise ConfigError(str(exc)) from None
    trace = solvers.run(p, algorithm, sched, spec.x0, spec.y0, spec.iterations, seed=spec.seed)
    st = ode.ContinuousState(0.0, np.array(spec.x0), np.array(spec.y0))
    dev = resid = 0.0
    for rec in trace.records[1:]:
        new = ode.implicit_euler_step(system, st, system.s)
        resid = max(resid, ode.implicit_residual(system, st, new, system.s))
        dev = max(dev, float(np.max(np.abs(new.X - rec.x), initial=0.0)),
                  float(np.max(np.abs(new.Y - rec.y), initial=0.0)))
        st = new
    return {"max_deviation": dev, "max_residual": resid, "steps": spec.iterations,
            "algorithm": algorithm, "schedule": sched.to_dict()}


# -- command line -------------------------------------------------------------


def _load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _print_summary(res, stream):
    tr = res["trace"]
    x, y = tr.xs[-1], tr.ys[-1]
    print(f"k={len(tr) - 1} x={np.array2string(x, precision=12)} y={np.array2string(y, precision=12)}",
          file=stream)
    for path in res["written"].values():
        print(f"wrote {path}", file=stream)
    checks = res["report"].bound_checks
    if checks:
        n_ok = sum(c.passed for c in checks)
        print(f"bound checks: {n_ok}/{len(checks)} pass", file=stream)
        for tag in res["failed_checks"]:
            print(f"  FAILED {tag}", file=stream)


def _cmd_run(args):
    spec = _load(args.config)
    res = run_experiment(spec, args.out_dir)
    _print_summary(res, sys.stdout)
    return EXIT_OK


def _sweep_point(spec, param, value, out_dir):
    sched = dict(spec.schedule)
    if param == "s":
        if "s" not in sched:
            raise ConfigError("cannot sweep 's' for a {'tau', 'sigma'} schedule")
        sched["s"] = value
    else:
        if param not in sched:
            raise ConfigError(f"cannot sweep {param!r} for a {{'s'}} schedule")
        sched[param] = value
    outputs = {k: (None if v is None else os.path.basename(v)) for k, v in spec.outputs.items()}
    point = replace(spec, schedule=sched, outputs=outputs)
    target = Path(out_dir) / f"{param}={value:g}"
    return run_experiment(point, target)


def _cmd_sweep(args):
    spec = _load(args.config)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    if not values:
        raise ConfigError("--values is empty")
    for v in values:
        _positive(v, args.param)

    def one(v):
        try:
            return v, _sweep_point(spec, args.param, v, args.out_dir), None
        except ConfigError:
            raise
        except (solvers.SolverError, LinalgError, ValueError) as exc:
            return v, None, exc

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(one, values))
    status = EXIT_OK
    for v, res, exc in results:
        if exc is not None:
            code = EXIT_CONFIG if isinstance(exc, solvers.StepSizeError) else EXIT_NUMERICAL
            status = max(status, code)
            print(f"{args.param}={v:g}: error: {exc}")
            continue
        ne = res["report"].ne
        last = ne[-1] if ne.size else float("nan")
        x = res["trace"].xs[-1]
        print(f"{args.param}={v:g}: ok, final x={np.array2string(x, precision=8)}, last ne={last:.3e}")
    return status


def _cmd_counterexample(args):
    doc = {
        "problem": {"kind": "counterexample"},
        "algorithm": args.algorithm,
        "schedule": {"s": args.s},
        "x0": [args.x0],
        "y0": [args.y0],
        "iterations": args.steps,
        "outputs": {"csv": "trace.csv", "json": "report.json", "svg": "trajectory.svg"},
    }
    spec = _from_mapping(doc)
    res = run_experiment(spec, args.out_dir)
    for r in res["trace"].records:
        print(f"{r.k:6d}  x={export.format_number(r.x[0])}  y={export.format_number(r.y[0])}")
    _print_summary(res, sys.stdout)
    return EXIT_OK


def _cmd_ode_compare(args):
    spec = _load(args.config)
    res = ode_compare(spec)
    print(f"max deviation over {res['steps']} steps: {res['max_deviation']:.3e} "
          f"(implicit residual {res['max_residual']:.3e})")
    if spec.outputs.get("json"):
        path = export.atomic_write(Path(args.out_dir) / spec.outputs["json"],
                                   json.dumps(res, indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="saddlekit", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def out_dir(p):
        p.add_argument("--out-dir", default=".", help="directory for output files (default: .)")

    p = sub.add_parser("run", help="run one experiment from a JSON config")
    p.add_argument("config")
    out_dir(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="repeat an experiment over step sizes")
    p.add_argument("config")
    p.add_argument("--param", required=True, choices=("s", "tau", "sigma"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1, help="points run in parallel")
    out_dir(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("counterexample", help="iterate on x - x*y + y")
    p.add_argument("--algorithm", default="arrow-hurwicz", choices=solvers.ALGORITHMS)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--y0", type=float, default=1.0)
    out_dir(p)
    p.set_defaults(func=_cmd_counterexample)

    p = sub.add_parser("ode-compare", help="compare PDHG with implicit Euler on the ODE")
    p.add_argument("config")
    out_dir(p)
    p.set_defaults(func=_cmd_ode_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ProblemError, solvers.StepSizeError, PlotError, FunctionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (solvers.SolverError, LinalgError, ode.OdeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
