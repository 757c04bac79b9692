"""Rolling-horizon monthly UCM: nine-day windows stepped a week at a time."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .demand import DemandSeries
from .system import HOURS_PER_MONTH, NetworkCase, UnitState
from .ucm import (CommitmentSolution, InfeasibleError, InitialConditions, UcmConfig,
                  recompute_costs, solve_ucm)

log = logging.getLogger(__name__)

WEEK = 168
LOOKAHEAD = 48


@dataclass(frozen=True)
class WindowPlan:
    start_hour: int
    length_hours: int
    retained_hours: int

    @property
    def retained_end(self) -> int:
        return self.start_hour + self.retained_hours


@dataclass
class WindowStats:
    window: int
    start_hour: int
    objective: float
    gap: float | None
    wall_seconds: float


@dataclass
class MonthlySolution:
    solution: CommitmentSolution
    windows: list[WindowStats] = field(default_factory=list)
    plan: list[WindowPlan] = field(default_factory=list)

    @property
    def cost_total(self) -> float:
        return self.solution.cost_total

    @property
    def wall_seconds(self) -> float:
        return sum(w.wall_seconds for w in self.windows)

    def stats_table(self) -> str:
        rows = ["window,start_hour,objective,gap,wall_seconds"]
        for w in self.windows:
            gap = "" if w.gap is None else f"{w.gap:.6g}"
            rows.append(f"{w.window},{w.start_hour},{w.objective:.6f},{gap},{w.wall_seconds:.3f}")
        return "\n".join(rows) + "\n"


def plan_windows(month_hours: int = HOURS_PER_MONTH, step: int = WEEK,
                 lookahead: int = LOOKAHEAD) -> list[WindowPlan]:
    """Windows of ``step + lookahead`` hours starting every ``step`` hours.

    A window that reaches the end of the month is the last one and keeps
    everything it solved, so the retained segments tile the month exactly.
    """
    if month_hours <= 0 or month_hours % 24:
        raise ValueError(f"unsupported month length {month_hours} h")
    if step <= 0 or lookahead < 0:
        raise ValueError("step must be positive and lookahead nonnegative")
    plans = []
    start = 0
    while start < month_hours:
        length = min(step + lookahead, month_hours - start)
        last = start + length >= month_hours
        plans.append(WindowPlan(start, length, length if last else step))
        if last:
            break
        start += step
    return plans


def extract_initial_conditions(solution: CommitmentSolution, at_hour: int,
                               init: InitialConditions) -> InitialConditions:
    """State of every unit after the first ``at_hour`` hours of ``solution``.

    Up and down counters run back through ``init`` when the unit has not
    changed state inside the window.
    """
    if not 1 <= at_hour <= solution.hours:
        raise ValueError(f"boundary {at_hour} outside window of {solution.hours} h")
    out = {}
    for i, uid in enumerate(solution.unit_ids):
        states = solution.u[i, :at_hour]
        last = int(states[-1])
        changes = np.flatnonzero(states != last)
        if changes.size:
            run = at_hour - 1 - int(changes[-1])
        else:
            s0 = init[uid]
            run = at_hour + (s0.ut0 if s0.u0 == 1 else s0.dt0) if s0.u0 == last else at_hour
        g0 = float(solution.g[i, at_hour - 1]) if last else 0.0
        out[uid] = UnitState(u0=last, g0=g0, ut0=run if last else 0, dt0=0 if last else run)
    return out


def _clamp_state(case: NetworkCase, init: InitialConditions) -> InitialConditions:
    # solver noise can leave g0 a hair outside [p_min, p_max]
    out = {}
    for unit in case.units:
        s = init[unit.id]
        if s.u0:
            s = replace(s, g0=min(max(s.g0, unit.p_min), unit.p_max))
        out[unit.id] = s
    return out


def allocate_window_budget(remaining_budget: float, window: WindowPlan,
                           hours_left_in_month: int) -> float:
    if remaining_budget < 0:
        raise ValueError("remaining budget must be nonnegative")
    if hours_left_in_month <= 0:
        return 0.0
    return min(remaining_budget, remaining_budget * window.length_hours / hours_left_in_month)


def solve_month(case: NetworkCase, demand: DemandSeries, init0: InitialConditions,
                config: UcmConfig | None = None, month_hours: int | None = None,
                step: int = WEEK, lookahead: int = LOOKAHEAD) -> MonthlySolution:
    """Solve the windows in order, seeding each from its predecessor's retained end."""
    config = config or UcmConfig()
    month_hours = month_hours or demand.horizon_hours
    if demand.horizon_hours < month_hours:
        raise ValueError(f"demand covers {demand.horizon_hours} h, month needs {month_hours} h")
    plan = plan_windows(month_hours, step, lookahead)
    remaining = {u.id: u.energy_budget * month_hours / HOURS_PER_MONTH
                 for u in case.units if u.energy_budget is not None}
    remaining.update({k: v for k, v in config.window_energy_caps.items()})
    init = dict(init0)
    parts: list[CommitmentSolution] = []
    stats: list[WindowStats] = []

    for k, window in enumerate(plan):
        caps = {uid: allocate_window_budget(left, window, month_hours - window.start_hour)
                for uid, left in remaining.items()}
        cfg = replace(config, window_energy_caps=caps)
        window_demand = demand.slice(window.start_hour, window.start_hour + window.length_hours)
        start = time.perf_counter()
        try:
            sol = solve_ucm(case, window_demand, window.length_hours, init, cfg)
        except InfeasibleError as exc:
            hour = None if exc.hour is None else window.start_hour + exc.hour
            where = f"window {k} (start hour {window.start_hour})"
            if hour is not None:
                where += f", month hour {hour}"
            raise InfeasibleError(f"{where}: {exc}", hour=hour, window=k) from exc
        elapsed = time.perf_counter() - start
        stats.append(WindowStats(k, window.start_hour, sol.objective, sol.mip_gap, elapsed))
        log.info("window %d start %d: obj %.2f gap %s in %.1fs", k, window.start_hour,
                 sol.objective, sol.mip_gap, elapsed)
        kept = sol.slice(0, window.retained_hours)
        parts.append(kept)
        for i, uid in enumerate(sol.unit_ids):
            if uid in remaining:
                used = math.fsum(kept.g[i])
                remaining[uid] = max(0.0, remaining[uid] - used)
        init = _clamp_state(case, extract_initial_conditions(sol, window.retained_hours, init))

    stitched = recompute_costs(case, CommitmentSolution.concatenate(parts), config.shed_penalty)
    return MonthlySolution(stitched, stats, plan)
