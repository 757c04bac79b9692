"""Monthly dispatch LP in the style of an energy-system optimisation model.

One monolithic linear programme over the month: block generation per unit
and hour, ramp limits, hydro energy budgets, and fixed costs spread over
output. True fixed costs are counted afterwards from the dispatch.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .demand import DemandSeries
from .solver import EQ, INFEASIBLE, LE, Model, SolveOptions, build_and_solve
from .system import HOURS_PER_MONTH, NetworkCase
from .ucm import InfeasibleError


@dataclass
class EsomConfig:
    fold_fixed_costs: bool = True
    include_network: bool = False
    include_ramps: bool = True
    on_epsilon: float = 1e-6
    backend: str = "highs"
    threads: int = 1

    def __post_init__(self):
        if self.on_epsilon <= 0:
            raise ValueError("on_epsilon must be positive")


@dataclass
class DispatchSolution:
    unit_ids: tuple[str, ...]
    g: np.ndarray  # [unit, hour]
    blocks: list[np.ndarray]  # per unit: [block, hour]
    cost_variable_true: float
    cost_fixed_expost: float
    lp_objective: float
    hours_on: dict[str, int]
    wall_seconds: float = 0.0
    flow: np.ndarray | None = None

    @property
    def cost_total_reported(self) -> float:
        return self.cost_variable_true + self.cost_fixed_expost

    @property
    def hours(self) -> int:
        return self.g.shape[1]

    def generation_by_unit(self) -> dict[str, float]:
        return {uid: float(math.fsum(self.g[i])) for i, uid in enumerate(self.unit_ids)}


def fold_fixed_costs(case: NetworkCase) -> dict[str, list[float]]:
    """Block marginal costs with each unit's fixed cost spread over its p_max."""
    folded = {}
    for unit in case.units:
        if unit.p_max <= 0:
            raise ValueError(f"unit {unit.id}: p_max must be positive to fold fixed costs")
        adder = unit.fixed_cost / unit.p_max
        folded[unit.id] = [b.marginal_cost + adder for b in unit.blocks]
    return folded


@dataclass
class EsomModel:
    model: Model
    hours: int
    blocks: list[np.ndarray]  # per unit: [block, hour] var indices
    flow: np.ndarray | None


def build_esom(case: NetworkCase, demand: DemandSeries, config: EsomConfig | None = None,
               hours: int | None = None) -> EsomModel:
    config = config or EsomConfig()
    T = hours or demand.horizon_hours
    if T > demand.horizon_hours:
        raise ValueError(f"demand covers {demand.horizon_hours} h, model needs {T} h")
    d = demand.for_case(case).values[:, :T]
    costs = fold_fixed_costs(case) if config.fold_fixed_costs else {
        u.id: [b.marginal_cost for b in u.blocks] for u in case.units}

    m = Model(name=f"esom-{case.name}-{T}h")
    blocks = []
    for unit in case.units:
        idx = np.array([[m.add_var(0.0, b.size_mw, cost=costs[unit.id][k],
                                   name=f"g[{unit.id},{t},{k}]").index for t in range(T)]
                        for k, b in enumerate(unit.blocks)], dtype=int)
        blocks.append(idx)

    def out(i: int, t: int, sign: float = 1.0) -> list[tuple[int, float]]:
        return [(int(j), sign) for j in blocks[i][:, t]]

    for i, unit in enumerate(case.units):
        if config.include_ramps:
            for t in range(1, T):
                m.add_constraint(out(i, t) + out(i, t - 1, -1.0), LE, unit.ramp_up)
                m.add_constraint(out(i, t - 1) + out(i, t, -1.0), LE, unit.ramp_down)
        if unit.energy_budget is not None:
            budget = unit.energy_budget * T / HOURS_PER_MONTH
            m.add_constraint([(int(j), 1.0) for j in blocks[i].ravel()], LE, budget)

    flow = None
    if config.include_network and case.lines:
        pos = case.bus_position()
        angle = np.array([[m.add_var(-math.pi, math.pi, name=f"theta[{b},{t}]").index
                           for t in range(T)] for b in case.buses], dtype=int)
        for t in range(T):
            m.fix(angle[pos[case.reference_bus], t], 0.0)
        flow = np.array([[m.add_var(-ln.capacity, ln.capacity, name=f"flow[{ln.id},{t}]").index
                          for t in range(T)] for ln in case.lines], dtype=int)
        for l, ln in enumerate(case.lines):
            b = case.base_mva * ln.susceptance
            for t in range(T):
                m.add_constraint([(flow[l, t], 1.0), (angle[pos[ln.from_bus], t], -b),
                                  (angle[pos[ln.to_bus], t], b)], EQ, 0.0)
        for k, bus in enumerate(case.buses):
            here = [i for i, u in enumerate(case.units) if u.bus == bus]
            inflow = [l for l, ln in enumerate(case.lines) if ln.to_bus == bus]
            outflow = [l for l, ln in enumerate(case.lines) if ln.from_bus == bus]
            for t in range(T):
                terms = [x for i in here for x in out(i, t)]
                terms += [(flow[l, t], 1.0) for l in inflow] + [(flow[l, t], -1.0) for l in outflow]
                m.add_constraint(terms, EQ, float(d[k, t]))
    else:
        system = d.sum(axis=0)
        for t in range(T):
            terms = [x for i in range(len(case.units)) for x in out(i, t)]
            m.add_constraint(terms, EQ, float(system[t]))
    return EsomModel(m, T, blocks, flow)


def solve_esom(case: NetworkCase, demand: DemandSeries, config: EsomConfig | None = None,
               hours: int | None = None) -> DispatchSolution:
    config = config or EsomConfig()
    built = build_esom(case, demand, config, hours)
    result = build_and_solve(built.model, SolveOptions(threads=config.threads,
                                                       backend=config.backend))
    if result.status == INFEASIBLE:
        system = demand.system()[:built.hours]
        short = np.flatnonzero(system > case.total_capacity + 1e-9)
        hour = int(short[0]) if short.size else None
        raise InfeasibleError("ESOM dispatch infeasible" +
                              (f": demand exceeds capacity at hour {hour}" if hour is not None else ""),
                              hour=hour)
    if not result.ok:
        raise RuntimeError(f"ESOM solve ended with status {result.status}")

    x = result.values
    block_values = [np.clip(x[idx], 0.0, None) for idx in built.blocks]
    g = np.array([b.sum(axis=0) for b in block_values])
    variable = 0.0
    fixed = 0.0
    hours_on = {}
    for i, unit in enumerate(case.units):
        prices = np.array([b.marginal_cost for b in unit.blocks])[:, None]
        variable += math.fsum((block_values[i] * prices).ravel())
        on = int(np.count_nonzero(g[i] > config.on_epsilon))
        hours_on[unit.id] = on
        fixed += unit.fixed_cost * on
    return DispatchSolution(
        unit_ids=tuple(u.id for u in case.units),
        g=g,
        blocks=block_values,
        cost_variable_true=variable,
        cost_fixed_expost=fixed,
        lp_objective=result.objective,
        hours_on=hours_on,
        wall_seconds=result.wall_seconds,
        flow=x[built.flow] if built.flow is not None else None,
    )


def check_ramps(case: NetworkCase, sol: DispatchSolution, tol: float = 1e-6) -> list[str]:
    problems = []
    for i, unit in enumerate(case.units):
        step = np.diff(sol.g[i])
        for t in np.flatnonzero(step > unit.ramp_up + tol):
            problems.append(f"unit {unit.id} hour {t + 1}: ramp-up {step[t]:.6f} MW")
        for t in np.flatnonzero(-step > unit.ramp_down + tol):
            problems.append(f"unit {unit.id} hour {t + 1}: ramp-down {-step[t]:.6f} MW")
    return problems


def emit_dispatch(sol: DispatchSolution) -> str:
    out = io.StringIO()
    out.write("unit,hour,g_mw\n")
    for i, uid in enumerate(sol.unit_ids):
        for t in range(sol.hours):
            out.write(f"{uid},{t},{float(sol.g[i, t])!r}\n")
    out.write("\ncost,value\n")
    for name in ("lp_objective", "cost_variable_true", "cost_fixed_expost", "cost_total_reported"):
        out.write(f"{name},{float(getattr(sol, name))!r}\n")
    return out.getvalue()


def save_dispatch(sol: DispatchSolution, path: str | Path) -> None:
    Path(path).write_text(emit_dispatch(sol))
