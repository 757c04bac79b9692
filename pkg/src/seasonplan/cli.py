"""Command-line entry point: ``seasonplan {run,study,audit,forecast}``.

Exit codes: 0 success, 2 invalid input or failed audit, 3 infeasible
model, 4 solver or backend error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .demand import (ClimatologyProfile, DemandFormatError, emit_demand, load_demand,
                     pfml_forecast)
from .esom import EsomConfig, save_dispatch
from .experiments import METRICS_HEADER, ScenarioFailure, ScenarioId, run_study, solve_scenario
from .rolling import extract_initial_conditions
from .solver import SolverError
from .system import HOURS_PER_MONTH, CaseFormatError, bundled_path, load_case, validate_case
from .ucm import (InfeasibleError, UcmConfig, audit_solution, cold_start, parse_solution,
                  save_solution)

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 2, 3, 4

log = logging.getLogger("seasonplan")


class InputError(ValueError):
    pass


def parse_months(text: str) -> list[int]:
    """``"3"``, ``"1..12"`` or ``"1,4,7"``."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
            months = list(range(lo, hi + 1))
        else:
            months = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad month list {text!r}") from None
    if not months or min(months) < 1:
        raise argparse.ArgumentTypeError(f"bad month list {text!r}")
    return months


def _load_case(path):
    case = load_case(path or bundled_path("rts24.case"))
    problems = validate_case(case)
    if problems:
        raise InputError("invalid case:\n  " + "\n  ".join(problems))
    return case


def _load_series(path, default, case):
    return load_demand(path or bundled_path(default), case)


def _check_months(series, months, what):
    have = series.horizon_hours // HOURS_PER_MONTH
    bad = [m for m in months if m > have]
    if bad:
        raise InputError(f"{what} covers {have} months; requested {bad}")


def _ucm_config(args) -> UcmConfig:
    return UcmConfig(mip_gap=args.mip_gap, threads=args.threads, backend=args.backend,
                     reserve_fraction=args.reserve, time_limit=args.time_limit)


def _esom_config(args) -> EsomConfig:
    return EsomConfig(include_network=args.include_network, threads=args.threads,
                      backend=args.backend)


def cmd_run(args) -> int:
    case = _load_case(args.case)
    observed = _load_series(args.demand, "demand_observed.csv", case)
    history = _load_series(args.history, "demand_history.csv", case)
    _check_months(observed, args.month, "demand")
    scenario = ScenarioId(args.model.upper(), args.forecast.upper())
    climatology = ClimatologyProfile.from_history(history)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    print(METRICS_HEADER)
    init = cold_start(case)
    for month in args.month:
        run = solve_scenario(case, observed, history, scenario, month, _ucm_config(args),
                             _esom_config(args), init=init, climatology=climatology)
        if scenario.model == "UCM":
            monthly = run.solution
            if out:
                save_solution(monthly.solution, out / f"solution_m{month:02d}.csv")
                (out / f"windows_m{month:02d}.csv").write_text(monthly.stats_table())
            if args.chain_months:
                init = extract_initial_conditions(monthly.solution, monthly.solution.hours, init)
        elif out:
            save_dispatch(run.solution, out / f"dispatch_m{month:02d}.csv")
        if out:
            (out / f"demand_m{month:02d}.csv").write_text(emit_demand(run.demand))
        print(",".join(run.metrics.csv_row()), flush=True)
    return EXIT_OK


def cmd_study(args) -> int:
    case = _load_case(args.case)
    observed = _load_series(args.demand, "demand_observed.csv", case)
    history = _load_series(args.history, "demand_history.csv", case)
    _check_months(observed, args.months, "demand")
    report = run_study(case, observed, history, args.months, args.out, _ucm_config(args),
                       _esom_config(args), workers=args.workers)
    for name, path in report.files.items():
        print(f"wrote {path}")
    for model, (mean, total) in report.runtime().items():
        print(f"{model}: mean {mean:.2f}s per month, total {total:.1f}s")
    if report.failures:
        for f in report.failures:
            print(f"FAILED {f}", file=sys.stderr)
        causes = [f.cause for f in report.failures]
        return EXIT_INFEASIBLE if all(isinstance(c, InfeasibleError) for c in causes) else EXIT_SOLVER
    return EXIT_OK


def cmd_audit(args) -> int:
    case = _load_case(args.case)
    solution = parse_solution(Path(args.solution).read_text(), case)
    demand = load_demand(args.demand, case)
    start = (args.month - 1) * HOURS_PER_MONTH if args.month else 0
    if demand.horizon_hours < start + solution.hours:
        raise InputError(f"demand has {demand.horizon_hours} h; solution needs "
                         f"{solution.hours} h from hour {start}")
    demand = demand.slice(start, start + solution.hours)
    problems = audit_solution(case, demand, solution, cold_start(case))
    for p in problems:
        print(p)
    print(f"{len(problems)} violation(s) over {solution.hours} h")
    return EXIT_OK if not problems else EXIT_INVALID


def cmd_forecast(args) -> int:
    case = load_case(args.case) if args.case else None
    observed = load_demand(args.demand, case)
    _check_months(observed, [args.month], "demand")
    if args.mode == "pf":
        series = observed.month(args.month)
    else:
        history = load_demand(args.history, case)
        series = pfml_forecast(observed, ClimatologyProfile.from_history(history), args.month)
    Path(args.out).write_text(emit_demand(series))
    return EXIT_OK


def _solver_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mip-gap", type=float, default=1e-3)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--backend", choices=("highs", "scipy"), default="highs")
    p.add_argument("--time-limit", type=float, default=None, help="seconds per UCM window")
    p.add_argument("--reserve", type=float, default=None,
                   help="UCM spinning reserve as a fraction of demand")
    p.add_argument("--include-network", action="store_true",
                   help="add nodal balance and DC flows to the ESOM dispatch")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seasonplan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    data_help = "defaults to the bundled file"

    run = sub.add_parser("run", help="solve one scenario for one or more months")
    run.add_argument("--case", help=data_help)
    run.add_argument("--demand", help=data_help)
    run.add_argument("--history", help=data_help)
    run.add_argument("--model", choices=("ucm", "esom"), required=True)
    run.add_argument("--forecast", choices=("pf", "pfml"), required=True)
    run.add_argument("--month", type=parse_months, required=True, help="N, A..B or A,B,C")
    run.add_argument("--out", help="directory for solution, demand and window files")
    run.add_argument("--chain-months", action="store_true",
                     help="start each UCM month from the previous month's final state")
    _solver_options(run)
    run.set_defaults(func=cmd_run)

    study = sub.add_parser("study", help="all four scenarios plus comparison tables")
    study.add_argument("--case", help=data_help)
    study.add_argument("--demand", help=data_help)
    study.add_argument("--history", help=data_help)
    study.add_argument("--months", type=parse_months, default=list(range(1, 13)))
    study.add_argument("--out", required=True)
    study.add_argument("--workers", type=int, default=1)
    _solver_options(study)
    study.set_defaults(func=cmd_study)

    audit = sub.add_parser("audit", help="check a UCM solution archive")
    audit.add_argument("--case", help=data_help)
    audit.add_argument("--demand", required=True)
    audit.add_argument("--solution", required=True)
    audit.add_argument("--month", type=int, default=None,
                       help="month of the demand file the solution covers")
    audit.set_defaults(func=cmd_audit)

    fc = sub.add_parser("forecast", help="write the PF or PFML demand for a month")
    fc.add_argument("--case", help="needed when the demand files hold system totals")
    fc.add_argument("--history", required=True)
    fc.add_argument("--demand", required=True)
    fc.add_argument("--month", type=int, required=True)
    fc.add_argument("--mode", choices=("pf", "pfml"), default="pfml")
    fc.add_argument("--out", required=True)
    fc.set_defaults(func=cmd_forecast)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioFailure as exc:
        return _report(exc, exc.cause)
    except (InfeasibleError, SolverError, InputError, CaseFormatError, DemandFormatError,
            OSError) as exc:
        return _report(exc, exc)


def _report(exc: BaseException, cause: BaseException) -> int:
    print(f"error: {exc}", file=sys.stderr)
    if isinstance(cause, InfeasibleError):
        return EXIT_INFEASIBLE
    if isinstance(cause, (InputError, CaseFormatError, DemandFormatError, OSError, ValueError,
                          IndexError)):
        return EXIT_INVALID
    return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
