"""
Command line front end: ``simulate``, ``fit`` and ``bench``.

Exit codes: 0 success, 2 invalid arguments, 3 optimizer failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyData, HolonomicError
from .optimizer import (
    ConstraintSet,
    OptimizeResult,
    OptimizerConfig,
    PenaltyConfig,
    Status,
    affine_inequality,
    ball_inequality,
    chgd_minimize,
    hgd_minimize,
)
from .vonmises import (
    AngleData,
    SufficientStats,
    VmParams,
    mle_direct_newton,
    read_angles,
    sufficient_stats,
    vm_initial_state,
    vm_pfaffian_system,
    vm_sample,
    write_angles,
)

EXIT_OK, EXIT_SPEC, EXIT_OPTIMIZER, EXIT_IO = 0, 2, 3, 4
METHODS = ("hgd", "chgd", "newton")
# inactive for the benchmark's data, so chgd times the penalty machinery on an interior optimum
BENCH_CONSTRAINT = "disk 10"
TRACE_COLUMNS = ("k", "theta1", "theta2", "L", "grad_norm", "alpha", "penalty", "feasible")


class SpecError(ValueError):
    """Invalid run or benchmark specification."""


class DataError(Exception):
    """Unreadable or malformed angle file."""


# -- specs --------------------------------------------------------------------

def parse_constraint(text: str):
    """Parse ``linear a b c`` (a t1 + b t2 + c <= 0) or ``disk r`` (t1^2 + t2^2 <= r^2)."""
    parts = text.split()
    if not parts:
        raise SpecError("empty constraint")
    kind, args = parts[0].lower(), parts[1:]
    try:
        values = [float(a) for a in args]
    except ValueError:
        raise SpecError(f"non-numeric constraint arguments in {text!r}") from None
    if kind == "linear" and len(values) == 3:
        a, b, c = values
        return affine_inequality([a, b], c, label=text)
    if kind == "disk" and len(values) == 1 and values[0] > 0:
        return ball_inequality(values[0], label=text)
    raise SpecError(f"cannot parse constraint {text!r}; expected 'linear a b c' or 'disk r'")


def parse_pair(text: str) -> np.ndarray:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise SpecError(f"expected two comma-separated numbers, got {text!r}") from None
    return np.array([a, b])


@dataclass
class RunSpec:
    method: str
    x0: np.ndarray
    constraints: list = field(default_factory=list)
    cfg: OptimizerConfig = field(default_factory=OptimizerConfig)
    pcfg: PenaltyConfig = field(default_factory=PenaltyConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise SpecError(f"unknown method {self.method!r}")
        if self.method == "chgd" and not self.constraints:
            raise SpecError("chgd requires at least one --constraint")
        if self.method != "chgd" and self.constraints:
            raise SpecError(f"{self.method} does not accept constraints")

    @property
    def constraint_set(self) -> ConstraintSet:
        return ConstraintSet(inequalities=self.constraints)


@dataclass
class BenchSpec:
    trials: int = 500
    methods: tuple = METHODS
    theta: np.ndarray = field(default_factory=lambda: np.array([2.12, 2.12]))
    n: int = 100
    seed: int = 0
    run: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise SpecError("trials must be at least 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise SpecError(f"unknown methods {sorted(unknown)}")


def warm_up() -> None:
    """Load the compiled integrator kernels so they are not charged to the first timed fit."""
    stats = SufficientStats(0.5, 0.5)
    start = vm_initial_state((1.0, 0.0), stats)
    hgd_minimize(vm_pfaffian_system(stats), start.point, start.F, OptimizerConfig(max_iters=1))


def run_fit(spec: RunSpec, stats: SufficientStats) -> tuple[OptimizeResult, float]:
    """Fit one data set; the returned time covers building ``F(x0)`` and the iterations."""
    t0 = time.perf_counter()
    if spec.method == "newton":
        result = mle_direct_newton(stats, spec.x0, spec.cfg)
    else:
        system = vm_pfaffian_system(stats)
        start = vm_initial_state(spec.x0, stats)
        if spec.method == "hgd":
            result = hgd_minimize(system, start.point, start.F, spec.cfg)
        else:
            result = chgd_minimize(
                system, start.point, start.F, spec.constraint_set, spec.cfg, spec.pcfg
            )
    return result, time.perf_counter() - t0


def result_ok(spec: RunSpec, result: OptimizeResult) -> bool:
    """Converged, or a CHGD line search that stalled at a feasible point."""
    if result.status is Status.CONVERGED:
        return True
    return (
        spec.method == "chgd"
        and result.status is Status.LINE_SEARCH_FAILED
        and spec.constraint_set.is_feasible(result.x, tol=1e-6)
    )


def summary(spec: RunSpec, stats: SufficientStats, result: OptimizeResult, seconds: float) -> dict:
    est = VmParams.natural(*result.x)
    return {
        "method": spec.method,
        "status": result.status.value,
        "message": result.message,
        "iterations": result.iterations,
        "wall_time": seconds,
        "estimate": {
            "theta1": est.theta1,
            "theta2": est.theta2,
            "kappa": est.kappa,
            "mu": est.mu,
        },
        "objective": result.value,
        "x0": [float(v) for v in spec.x0],
        "constraints": [c.label for c in spec.constraints],
        "data": {"n": stats.n, "c_bar": stats.c_bar, "s_bar": stats.s_bar},
    }


def write_trace(path, result: OptimizeResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(result.trace.rows())


# -- commands -----------------------------------------------------------------

def _configs(args) -> tuple[OptimizerConfig, PenaltyConfig]:
    try:
        cfg = OptimizerConfig(max_iters=args.max_iters, grad_tol=args.grad_tol)
        pcfg = PenaltyConfig(rho=args.rho, xi=args.xi, shrink=args.shrink)
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    return cfg, pcfg


def _load_data(args) -> AngleData:
    if args.data is not None:
        try:
            return read_angles(args.data)
        except EmptyData:
            raise
        except ValueError as exc:
            raise DataError(f"malformed angle file {args.data}: {exc}") from None
    if args.kappa is None:
        raise SpecError("give --data PATH or a simulation spec (--kappa, --mu, --n, --seed)")
    if args.kappa < 0 or args.n < 1:
        raise SpecError("need kappa >= 0 and n >= 1")
    return vm_sample(args.kappa, args.mu, args.n, args.seed)


def cmd_simulate(args) -> int:
    if args.kappa < 0 or args.n < 1:
        raise SpecError("need kappa >= 0 and n >= 1")
    data = vm_sample(args.kappa, args.mu, args.n, args.seed)
    write_angles(
        args.out, data,
        header=f"von Mises sample kappa={args.kappa} mu={args.mu} n={args.n} seed={args.seed}",
    )
    stats = sufficient_stats(data)
    print(json.dumps({"path": str(args.out), "n": stats.n, "c_bar": stats.c_bar, "s_bar": stats.s_bar}))
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg, pcfg = _configs(args)
    spec = RunSpec(
        method=args.method,
        x0=parse_pair(args.x0),
        constraints=[parse_constraint(c) for c in args.constraint],
        cfg=cfg,
        pcfg=pcfg,
    )
    stats = sufficient_stats(_load_data(args))
    warm_up()
    try:
        result, seconds = run_fit(spec, stats)
    except HolonomicError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZER

    report = json.dumps(summary(spec, stats, result, seconds), indent=2)
    if args.out:
        Path(args.out).write_text(report + "\n")
    else:
        print(report)
    if args.trace:
        write_trace(args.trace, result)
    if not result_ok(spec, result):
        print(f"error: optimizer stopped with status {result.status.value}: {result.message}",
              file=sys.stderr)
        return EXIT_OPTIMIZER
    return EXIT_OK


def bench(spec: BenchSpec) -> tuple[list[dict], dict]:
    """
    Paired timing trials; every method fits the same sample in each trial.

    Returns the raw per-trial rows and per-method aggregates.
    """
    params = VmParams.natural(*spec.theta)
    runs = {
        m: RunSpec(method=m,
                   constraints=(spec.run.get("constraints") or [parse_constraint(BENCH_CONSTRAINT)])
                   if m == "chgd" else [],
                   x0=spec.run.get("x0", np.array([-2.0, 0.1])),
                   cfg=spec.run.get("cfg", OptimizerConfig()),
                   pcfg=spec.run.get("pcfg", PenaltyConfig()))
        for m in spec.methods
    }
    warm_up()

    rng = np.random.default_rng(spec.seed)
    rows = []
    for trial in range(spec.trials):
        stats = sufficient_stats(vm_sample(params.kappa, params.mu, spec.n, rng))
        for method, run in runs.items():
            row = {"trial": trial, "method": method}
            try:
                result, seconds = run_fit(run, stats)
                row.update(
                    status=result.status.value,
                    ok=int(result_ok(run, result)),
                    seconds=seconds,
                    theta1=float(result.x[0]),
                    theta2=float(result.x[1]),
                    iterations=result.iterations,
                )
            except HolonomicError as exc:
                row.update(status=type(exc).__name__, ok=0, seconds=math.nan,
                           theta1=math.nan, theta2=math.nan, iterations=-1)
            rows.append(row)

    table = {}
    for method in spec.methods:
        mine = [r for r in rows if r["method"] == method and r["ok"]]
        table[method] = {
            "trials": sum(r["method"] == method for r in rows),
            "failures": sum(r["method"] == method and not r["ok"] for r in rows),
            "mean_seconds": float(np.mean([r["seconds"] for r in mine])) if mine else math.nan,
            "mean_theta1": float(np.mean([r["theta1"] for r in mine])) if mine else math.nan,
            "mean_theta2": float(np.mean([r["theta2"] for r in mine])) if mine else math.nan,
            "mean_iterations": float(np.mean([r["iterations"] for r in mine])) if mine else math.nan,
        }
    return rows, table


def format_table(table: dict) -> str:
    lines = [f"{'method':<8}{'mean time (s)':>16}{'theta1':>12}{'theta2':>12}{'iters':>8}{'failed':>8}"]
    for method, row in table.items():
        lines.append(
            f"{method:<8}{row['mean_seconds']:>16.6f}{row['mean_theta1']:>12.6f}"
            f"{row['mean_theta2']:>12.6f}{row['mean_iterations']:>8.2f}{row['failures']:>8d}"
        )
    return "\n".join(lines)


def cmd_bench(args) -> int:
    cfg, pcfg = _configs(args)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    constraints = [parse_constraint(c) for c in (args.constraint or [BENCH_CONSTRAINT])]
    spec = BenchSpec(
        trials=args.trials,
        methods=methods,
        theta=parse_pair(args.theta),
        n=args.n,
        seed=args.seed,
        run={"constraints": constraints, "x0": parse_pair(args.x0), "cfg": cfg, "pcfg": pcfg},
    )
    rows, table = bench(spec)
    print(format_table(table))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    failures = sum(r["failures"] for r in table.values())
    if failures:
        print(f"{failures} failed fits", file=sys.stderr)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def _add_optimizer_flags(p):
    p.add_argument("--x0", default="-2.0,0.1", help="starting point 'theta1,theta2'")
    p.add_argument("--constraint", action="append", default=[],
                   help="'linear a b c' or 'disk r'; repeatable")
    p.add_argument("--rho", type=float, default=10.0)
    p.add_argument("--xi", type=float, default=0.1)
    p.add_argument("--shrink", type=float, default=0.5)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--grad-tol", type=float, default=1e-8)


def _add_sim_flags(p, required=False):
    p.add_argument("--kappa", type=float, required=required)
    p.add_argument("--mu", type=float, default=math.pi / 4)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_SPEC)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="holodescent", description=__doc__.splitlines()[1])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw a von Mises sample and write it to a file")
    _add_sim_flags(p, required=True)
    p.add_argument("--out", required=True, help="output angle file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit von Mises parameters by hgd, chgd or newton")
    p.add_argument("--method", choices=METHODS, default="hgd")
    p.add_argument("--data", help="angle file, one radian value per line")
    _add_sim_flags(p)
    _add_optimizer_flags(p)
    p.add_argument("--trace", help="write the iteration trace as CSV")
    p.add_argument("--out", help="write the JSON summary here instead of stdout")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="paired runtime benchmark over simulated samples")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--theta", default="2.12,2.12", help="true natural parameters 'theta1,theta2'")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    _add_optimizer_flags(p)
    p.add_argument("--out", help="write raw per-trial rows as CSV")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (OSError, EmptyData, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
