"""Command-line front end.

Three subcommands: ``select`` runs factor-number selectors on a CSV panel
and writes a JSON report, ``simulate`` runs the Monte Carlo grid and
writes frequency curves, ``smooth`` evaluates the fitted curves on a grid
for external plotting. Every failure maps to a documented exit code.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import errors
from .core import (
    KernelSpec,
    bandwidth_rule_of_thumb,
    estimate_factors,
    local_linear_smooth,
)
from .errors import ConfigError, FfselectError
from .io import (
    IngestResult,
    IngestSpec,
    MethodResult,
    RunReport,
    ingest_csv,
    write_report,
)
from .io import _atomic_write_text
from .selectors import FtcvConfig, LadleConfig, ftcv_select, icp_select, ladle_select
from .simlab import METHODS, REGIMES, SCENARIOS, ScenarioSpec, emit_frequency_curves, run_grid

OS_ERROR_EXIT = 5


def _exit_code_map() -> str:
    names = []
    for obj in vars(errors).values():
        if isinstance(obj, type) and issubclass(obj, FfselectError):
            names.append((obj.exit_code, obj.__name__))
    names.sort()
    lines = ["exit codes:", "  0   success", f"  {OS_ERROR_EXIT}   operating system error (file I/O)"]
    lines += [f"  {code:<3} {name}" for code, name in names]
    lines.append("  1 is also used for unexpected internal errors; 2 for usage errors.")
    return "\n".join(lines)


def _add_ingest_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("csv", help="input CSV file with a header row")
    sub.add_argument("--u-column", required=True, help="name of the covariate column")
    sub.add_argument(
        "--response-columns", nargs="+", metavar="NAME",
        help="response column names (default: every other column)",
    )
    sub.add_argument(
        "--log-u", action="store_true",
        help="apply a natural log to the covariate (it must be positive)",
    )
    sub.add_argument(
        "--keep-incomplete", action="store_true",
        help="fail on missing values instead of dropping their rows",
    )
    sub.add_argument("--date-column", help="ISO-8601 date column for period filtering")
    sub.add_argument("--date-start", help="inclusive period start (ISO date)")
    sub.add_argument("--date-end", help="inclusive period end (ISO date)")


def _ingest_from_args(args: argparse.Namespace) -> IngestResult:
    spec = IngestSpec(
        path=args.csv,
        u_column=args.u_column,
        response_columns=tuple(args.response_columns) if args.response_columns else None,
        log_u=args.log_u,
        drop_incomplete=not args.keep_incomplete,
        date_column=args.date_column,
        date_start=args.date_start,
        date_end=args.date_end,
    )
    return ingest_csv(spec)


def _kernel_from_args(args: argparse.Namespace, u: np.ndarray) -> KernelSpec:
    h = args.bandwidth if args.bandwidth is not None else bandwidth_rule_of_thumb(u)
    return KernelSpec(args.kernel, h)


_SELECT_CHOICES = METHODS + ("all",)


def _resolve_methods(chosen: list[str] | None, k_folds: int | None) -> list[str]:
    methods = list(chosen) if chosen else ["all"]
    out: list[str] = []
    for name in methods:
        expanded = list(METHODS) if name == "all" else [name]
        for item in expanded:
            if item not in out:
                out.append(item)
    if k_folds is not None:
        if k_folds < 2:
            raise ConfigError(f"--k-folds must be at least 2, got {k_folds}")
        extra = f"ftcv{k_folds}"
        if extra not in out:
            out.append(extra)
    return out


def _run_method(name: str, ingest: IngestResult, kernel: KernelSpec, args):
    panel = ingest.panel
    if name == "icp":
        return icp_select(panel, kernel, p_max=args.p_max, p_min=args.p_min)
    if name == "ladle":
        cfg = LadleConfig(p_max=args.p_max, p_min=args.p_min, rng_seed=args.seed)
        return ladle_select(panel, kernel, cfg)
    if name.startswith("ftcv"):
        k = int(name[4:])
        cfg = FtcvConfig(
            k_folds=None if k == 1 else k,
            p_max=args.p_max, p_min=args.p_min, rng_seed=args.seed,
        )
        return ftcv_select(panel, kernel, cfg)
    raise ConfigError(f"unknown method {name!r}")


def cmd_select(args: argparse.Namespace) -> int:
    if args.p_max < 1:
        raise ConfigError(f"--p-max must be at least 1, got {args.p_max}")
    methods = _resolve_methods(args.method, args.k_folds)
    ingest = _ingest_from_args(args)
    kernel = _kernel_from_args(args, ingest.panel.u)
    results = []
    for name in methods:
        t0 = time.perf_counter()
        report = _run_method(name, ingest, kernel, args)
        wall_ms = (time.perf_counter() - t0) * 1e3 if args.timings else None
        results.append(
            MethodResult(
                method=report.method,
                p_hat=report.p_hat,
                criterion_values=tuple(report.criterion_values),
                p_min=report.p_min,
                p_max=report.p_max,
                bandwidth=kernel.bandwidth,
                kernel=kernel.family.value,
                seed=args.seed,
                n=ingest.panel.n,
                m=ingest.panel.m,
                warnings=report.warnings,
                wall_ms=wall_ms,
            )
        )
    run = RunReport(
        source=ingest.source,
        n=ingest.panel.n,
        m=ingest.panel.m,
        u_column=ingest.u_column,
        response_columns=ingest.response_columns,
        log_u=ingest.log_u,
        date_column=ingest.date_column,
        date_range=ingest.date_range,
        rows_dropped_incomplete=ingest.rows_dropped_incomplete,
        rows_dropped_period=ingest.rows_dropped_period,
        bandwidth=kernel.bandwidth,
        kernel=kernel.family.value,
        seed=args.seed,
        results=tuple(results),
    )
    write_report(run, args.out)
    for entry in results:
        print(f"{entry.method} {entry.p_hat} {entry.criterion_at_p_hat!r}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cells = [
        ScenarioSpec(args.scenario, args.regime, n, m, theta)
        for n in args.n for m in args.m for theta in args.theta
    ]
    result = run_grid(
        cells,
        replications=args.reps,
        master_seed=args.seed,
        methods=tuple(args.methods),
        p_min=args.p_min,
        p_max=args.p_max,
        kernel_family=args.kernel,
        workers=args.workers,
    )
    emit_frequency_curves(result, args.out_curves)
    print("n m theta regime method frequency replications failures")
    order = sorted(
        result.cells,
        key=lambda c: (c.spec.n, c.spec.m, c.spec.theta, c.spec.regime, c.method),
    )
    for cell in order:
        s = cell.spec
        print(
            f"{s.n} {s.m} {s.theta:g} {s.regime} {cell.method} "
            f"{cell.frequency:.3f} {cell.replications} {cell.failures}"
        )
    return 0


def cmd_smooth(args: argparse.Namespace) -> int:
    ingest = _ingest_from_args(args)
    panel = ingest.panel
    kernel = _kernel_from_args(args, panel.u)
    if args.at_observations:
        grid = np.sort(panel.u)
    else:
        size = args.grid_size if args.grid_size is not None else 100
        if size < 2:
            raise ConfigError(f"--grid-size must be at least 2, got {size}")
        grid = np.linspace(panel.u.min(), panel.u.max(), size)
    surface = local_linear_smooth(panel, kernel, eval_points=grid)
    columns = [grid] + [surface.values[:, j] for j in range(panel.m)]
    names = ["u"] + list(ingest.response_columns)
    if args.factors is not None:
        p = args.factors
        if p < 1:
            raise ConfigError(f"--factors must be at least 1, got {p}")
        estimate = estimate_factors(panel, kernel, p=p)
        fhat = surface.values @ estimate.loadings
        columns += [fhat[:, j] for j in range(p)]
        names += [f"factor_{j + 1}" for j in range(p)]
    lines = [",".join(names)]
    for i in range(len(grid)):
        lines.append(",".join(repr(float(col[i])) for col in columns))
    _atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote {len(grid)} rows x {len(names)} columns to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ffselect",
        description="Estimate the number of common functional factors in a panel.",
        epilog=_exit_code_map(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    select = sub.add_parser(
        "select", help="run selectors on a CSV panel and write a JSON report",
        epilog=_exit_code_map(), formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    _add_ingest_flags(select)
    select.add_argument(
        "--method", action="append", choices=_SELECT_CHOICES, metavar="NAME",
        help=f"selector to run, may repeat (choices: {', '.join(_SELECT_CHOICES)}; default all)",
    )
    select.add_argument(
        "--k-folds", type=int,
        help="also run cross-validation with this many folds (adds method ftcvK)",
    )
    select.add_argument("--p-min", type=int, default=0, help="smallest candidate order (default 0)")
    select.add_argument("--p-max", type=int, default=8, help="largest candidate order (default 8)")
    select.add_argument(
        "--bandwidth", type=float,
        help="smoothing bandwidth (default: rule of thumb from the covariate)",
    )
    select.add_argument(
        "--kernel", choices=("epanechnikov", "gaussian"), default="epanechnikov",
        help="kernel family (default epanechnikov)",
    )
    select.add_argument("--seed", type=int, default=0, help="seed for resampling steps (default 0)")
    select.add_argument("--out", default="run_report.json", help="report path (default run_report.json)")
    select.add_argument(
        "--timings", action="store_true",
        help="record wall-clock times; off by default so identical runs produce identical bytes",
    )
    select.set_defaults(func=cmd_select)

    simulate = sub.add_parser(
        "simulate", help="run the Monte Carlo grid and write frequency curves",
        epilog=_exit_code_map(), formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    simulate.add_argument("--scenario", required=True, choices=SCENARIOS)
    simulate.add_argument("--regime", required=True, choices=REGIMES)
    simulate.add_argument("--n", type=int, nargs="+", required=True, help="panel row counts")
    simulate.add_argument("--m", type=int, nargs="+", required=True, help="panel series counts")
    simulate.add_argument("--theta", type=float, nargs="+", required=True, help="noise levels")
    simulate.add_argument("--reps", type=int, required=True, help="replications per cell")
    simulate.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    simulate.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    simulate.add_argument("--p-min", type=int, default=1, help="smallest candidate order (default 1)")
    simulate.add_argument("--p-max", type=int, default=8, help="largest candidate order (default 8)")
    simulate.add_argument(
        "--kernel", choices=("epanechnikov", "gaussian"), default="gaussian",
        help="kernel family (default gaussian; see simlab docs)",
    )
    simulate.add_argument("--workers", type=int, help="worker threads (default: FFSELECT_THREADS or 1)")
    simulate.add_argument(
        "--out-curves", default="frequency_curves.csv",
        help="frequency CSV path (default frequency_curves.csv)",
    )
    simulate.set_defaults(func=cmd_simulate)

    smooth = sub.add_parser(
        "smooth", help="evaluate the smoothed curves (and optional factors) on a grid",
        epilog=_exit_code_map(), formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    _add_ingest_flags(smooth)
    grid_group = smooth.add_mutually_exclusive_group()
    grid_group.add_argument(
        "--grid-size", type=int,
        help="number of equally spaced points spanning the covariate range (default 100)",
    )
    grid_group.add_argument(
        "--at-observations", action="store_true",
        help="evaluate at the observed covariate values instead of a grid",
    )
    smooth.add_argument("--factors", type=int, help="append this many estimated factor columns")
    smooth.add_argument(
        "--bandwidth", type=float,
        help="smoothing bandwidth (default: rule of thumb from the covariate)",
    )
    smooth.add_argument(
        "--kernel", choices=("epanechnikov", "gaussian"), default="epanechnikov",
        help="kernel family (default epanechnikov)",
    )
    smooth.add_argument("--out", default="smoothed.csv", help="output CSV path (default smoothed.csv)")
    smooth.set_defaults(func=cmd_smooth)
    return parser


def entry(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FfselectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return OS_ERROR_EXIT
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(entry())


if __name__ == "__main__":
    main()
