"""Scenario runs and the cross-model comparison tables.

Four scenarios cross the two models (rolling-horizon UCM and the monthly
ESOM dispatch) with the two demand representations (perfect forecast and
monthly-level perfect forecast). Every percentage difference is taken
against the UCM-PF value for the same month and metric.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .demand import ClimatologyProfile, DemandSeries, perfect_forecast, pfml_forecast
from .esom import EsomConfig, solve_esom
from .rolling import solve_month
from .system import FUELS, NetworkCase
from .ucm import InitialConditions, UcmConfig, cold_start

log = logging.getLogger(__name__)

MODELS = ("UCM", "ESOM")
FORECASTS = ("PF", "PFML")
METRICS = ("cost",) + FUELS

METRICS_HEADER = ("month,scenario,total_cost,cost_fixed,cost_startup,cost_variable,"
                  "gen_nuclear_mwh,gen_hydro_mwh,gen_coal_mwh,gen_gas_mwh,wall_seconds")
COMPARISON_HEADER = "month,metric,value_a,value_b,base,pct_diff"
RUNTIME_HEADER = "model,mean_wall_seconds,total_wall_seconds"
UNDEFINED = "undefined"


@dataclass(frozen=True, order=True)
class ScenarioId:
    model: str
    forecast: str

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.forecast not in FORECASTS:
            raise ValueError(f"forecast must be one of {FORECASTS}, got {self.forecast!r}")

    @property
    def label(self) -> str:
        return f"{self.model}-{self.forecast}"

    @classmethod
    def parse(cls, label: str) -> ScenarioId:
        model, _, forecast = label.upper().partition("-")
        return cls(model, forecast)

    def __str__(self) -> str:
        return self.label


UCM_PF = ScenarioId("UCM", "PF")
UCM_PFML = ScenarioId("UCM", "PFML")
ESOM_PF = ScenarioId("ESOM", "PF")
ESOM_PFML = ScenarioId("ESOM", "PFML")
SCENARIOS = (UCM_PF, UCM_PFML, ESOM_PF, ESOM_PFML)

# comparison id -> (scenario a, scenario b); the base is always UCM-PF
COMPARISONS = {
    "C1a": (UCM_PF, ESOM_PF),
    "C1b": (UCM_PFML, ESOM_PFML),
    "C2a": (UCM_PF, UCM_PFML),
    "C2b": (ESOM_PF, ESOM_PFML),
    "C3": (UCM_PF, ESOM_PFML),
}
BASE = UCM_PF


class ScenarioFailure(RuntimeError):
    """A solve failure tagged with the scenario and month it came from."""

    def __init__(self, scenario: ScenarioId, month: int, cause: BaseException):
        self.scenario = scenario
        self.month = month
        self.cause = cause
        super().__init__(f"{scenario.label} month {month}: {type(cause).__name__}: {cause}")


@dataclass
class MonthlyMetrics:
    month: int
    scenario: ScenarioId
    total_cost: float
    cost_fixed: float
    cost_startup: float
    cost_variable: float
    generation_by_fuel: dict[str, float]
    wall_seconds: float
    demand_mwh: float

    def value(self, metric: str) -> float:
        return self.total_cost if metric == "cost" else self.generation_by_fuel[metric]

    def csv_row(self) -> list[str]:
        return ([str(self.month), self.scenario.label]
                + [_fmt(x) for x in (self.total_cost, self.cost_fixed, self.cost_startup,
                                     self.cost_variable)]
                + [_fmt(self.generation_by_fuel[f]) for f in FUELS]
                + [f"{self.wall_seconds:.3f}"])


@dataclass(frozen=True)
class ComparisonRow:
    comparison: str
    month: int
    metric: str
    value_a: float
    value_b: float
    base: float
    pct_diff: float | None  # None when the base is zero

    @property
    def defined(self) -> bool:
        return self.pct_diff is not None

    def csv_row(self) -> list[str]:
        pct = UNDEFINED if self.pct_diff is None else _fmt(self.pct_diff)
        return [str(self.month), self.metric, _fmt(self.value_a), _fmt(self.value_b),
                _fmt(self.base), pct]


def _fmt(x: float) -> str:
    # fixed decimals keep the tables byte-stable; "+0.0" noise is folded to zero
    text = f"{x:.6f}"
    return "0.000000" if text == "-0.000000" else text


def fuel_totals(case: NetworkCase, by_unit: dict[str, float]) -> dict[str, float]:
    out = {f: [] for f in FUELS}
    for unit in case.units:
        out[unit.fuel].append(by_unit[unit.id])
    return {f: math.fsum(v) for f, v in out.items()}


def scenario_demand(observed: DemandSeries, climatology: ClimatologyProfile | None,
                    scenario: ScenarioId, month: int) -> DemandSeries:
    if scenario.forecast == "PF":
        return perfect_forecast(observed, month)
    if climatology is None:
        raise ValueError("PFML scenarios need a climatology profile")
    return pfml_forecast(observed, climatology, month)


@dataclass
class ScenarioRun:
    metrics: MonthlyMetrics
    demand: DemandSeries
    solution: object  # MonthlySolution for UCM, DispatchSolution for ESOM


def solve_scenario(case: NetworkCase, observed: DemandSeries, history: DemandSeries | None,
                   scenario: ScenarioId, month: int, ucm_config: UcmConfig | None = None,
                   esom_config: EsomConfig | None = None, init: InitialConditions | None = None,
                   climatology: ClimatologyProfile | None = None) -> ScenarioRun:
    """Like :func:`run_scenario` but also returns the demand and the raw solution."""
    try:
        if scenario.forecast == "PFML" and climatology is None:
            if history is None:
                raise ValueError("PFML scenarios need a demand history")
            climatology = ClimatologyProfile.from_history(history)
        demand = scenario_demand(observed, climatology, scenario, month)
        start = time.perf_counter()
        if scenario.model == "UCM":
            raw = solve_month(case, demand, init or cold_start(case), ucm_config)
            sol = raw.solution
            costs = (sol.cost_total, sol.cost_fixed, sol.cost_startup, sol.cost_variable)
        else:
            raw = sol = solve_esom(case, demand, esom_config)
            costs = (sol.cost_total_reported, sol.cost_fixed_expost, 0.0, sol.cost_variable_true)
        elapsed = time.perf_counter() - start
    except Exception as exc:  # noqa: BLE001 - re-raised with context
        raise ScenarioFailure(scenario, month, exc) from exc
    log.info("%s month %d: cost %.2f in %.1fs", scenario.label, month, costs[0], elapsed)
    metrics = MonthlyMetrics(
        month=month,
        scenario=scenario,
        total_cost=costs[0],
        cost_fixed=costs[1],
        cost_startup=costs[2],
        cost_variable=costs[3],
        generation_by_fuel=fuel_totals(case, sol.generation_by_unit()),
        wall_seconds=elapsed,
        demand_mwh=math.fsum(demand.values.ravel()),
    )
    return ScenarioRun(metrics, demand, raw)


def run_scenario(case: NetworkCase, observed: DemandSeries, history: DemandSeries | None,
                 scenario: ScenarioId, month: int, ucm_config: UcmConfig | None = None,
                 esom_config: EsomConfig | None = None, init: InitialConditions | None = None,
                 climatology: ClimatologyProfile | None = None) -> MonthlyMetrics:
    """Solve one scenario for one month and aggregate its metrics.

    ``climatology`` defaults to the profile of the full ``history``. UCM
    months start from ``init`` (or the case's initial state) so months are
    independent unless the caller chains them. Failures are re-raised as
    :class:`ScenarioFailure`.
    """
    return solve_scenario(case, observed, history, scenario, month, ucm_config, esom_config,
                          init, climatology).metrics


def compare(a: MonthlyMetrics, b: MonthlyMetrics, base: MonthlyMetrics,
            comparison: str = "") -> list[ComparisonRow]:
    """One row per metric with ``(a - b) / base * 100``; positive means ``a`` is larger."""
    if not a.month == b.month == base.month:
        raise ValueError(f"month mismatch: {a.month}, {b.month}, base {base.month}")
    rows = []
    for metric in METRICS:
        va, vb, vbase = a.value(metric), b.value(metric), base.value(metric)
        pct = None if vbase == 0 else (va - vb) / vbase * 100.0
        rows.append(ComparisonRow(comparison, a.month, metric, va, vb, vbase, pct))
    return rows


@dataclass
class StudyReport:
    metrics: list[MonthlyMetrics]
    comparisons: dict[str, list[ComparisonRow]]
    failures: list[ScenarioFailure] = field(default_factory=list)
    files: dict[str, Path] = field(default_factory=dict)

    def lookup(self, scenario: ScenarioId, month: int) -> MonthlyMetrics | None:
        for m in self.metrics:
            if m.scenario == scenario and m.month == month:
                return m
        return None

    def runtime(self) -> dict[str, tuple[float, float]]:
        """Mean and total wall seconds per model."""
        out = {}
        for model in MODELS:
            times = [m.wall_seconds for m in self.metrics if m.scenario.model == model]
            if times:
                out[model] = (math.fsum(times) / len(times), math.fsum(times))
        return out

    def pct(self, comparison: str, metric: str = "cost") -> list[float | None]:
        return [r.pct_diff for r in self.comparisons[comparison] if r.metric == metric]


def _job(args) -> MonthlyMetrics | ScenarioFailure:
    try:
        return run_scenario(*args)
    except ScenarioFailure as exc:
        return exc


def run_study(case: NetworkCase, observed: DemandSeries, history: DemandSeries,
              months: list[int], out_dir: str | Path | None = None,
              ucm_config: UcmConfig | None = None, esom_config: EsomConfig | None = None,
              workers: int = 1, climatology: ClimatologyProfile | None = None) -> StudyReport:
    """Run all four scenarios for every month and write the CSV report set.

    Jobs run under a pool of at most ``workers`` processes; ``workers=1``
    runs them inline. Failed jobs are collected rather than raised and the
    comparisons for their months are skipped.
    """
    if not months:
        raise ValueError("no months requested")
    climatology = climatology or ClimatologyProfile.from_history(history)
    jobs = [(case, observed, None, s, m, ucm_config, esom_config, None, climatology)
            for m in months for s in SCENARIOS]
    if workers <= 1:
        results = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, jobs))

    metrics = [r for r in results if isinstance(r, MonthlyMetrics)]
    failures = [r for r in results if isinstance(r, ScenarioFailure)]
    report = StudyReport(metrics, {cid: [] for cid in COMPARISONS}, failures)
    for month in months:
        base = report.lookup(BASE, month)
        for cid, (sa, sb) in COMPARISONS.items():
            a, b = report.lookup(sa, month), report.lookup(sb, month)
            if base is not None and a is not None and b is not None:
                report.comparisons[cid].extend(compare(a, b, base, cid))
    if out_dir is not None:
        report.files = write_report(report, out_dir)
    return report


def _table(header: str, rows: list[list[str]]) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def write_report(report: StudyReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    order = {s: k for k, s in enumerate(SCENARIOS)}
    metrics = sorted(report.metrics, key=lambda m: (m.month, order[m.scenario]))
    tables = {"metrics.csv": _table(METRICS_HEADER, [m.csv_row() for m in metrics])}
    for cid, rows in report.comparisons.items():
        tables[f"{cid.lower()}.csv"] = _table(COMPARISON_HEADER, [r.csv_row() for r in rows])
    tables["runtime.csv"] = _table(RUNTIME_HEADER, [
        [model, f"{mean:.3f}", f"{total:.3f}"] for model, (mean, total) in report.runtime().items()])
    tables["failures.csv"] = _table("scenario,month,error", [
        [f.scenario.label, str(f.month), f"{type(f.cause).__name__}: {f.cause}"]
        for f in sorted(report.failures, key=lambda f: (f.month, order[f.scenario]))])
    files = {}
    for name, text in tables.items():
        path = out / name
        path.write_text(text)
        files[name] = path
    return files
