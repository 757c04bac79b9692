"""Unit-commitment MILP: model builder, solve wrapper, and ex-post audit."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .demand import DemandSeries
from .solver import (EQ, GE, INFEASIBLE, LE, Model, SolveOptions, SolveResult,
                     build_and_solve)
from .system import HOURS_PER_MONTH, NetworkCase, UnitState, initial_state_problems

TOL = 1e-6


class InfeasibleError(RuntimeError):
    def __init__(self, message: str, hour: int | None = None, window: int | None = None):
        self.hour = hour
        self.window = window
        super().__init__(message)


InitialConditions = dict[str, UnitState]


def cold_start(case: NetworkCase) -> InitialConditions:
    """All units offline and free to start; ``[initial]`` entries override."""
    init = {u.id: UnitState(u0=0, g0=0.0, ut0=0, dt0=u.min_down) for u in case.units}
    init.update(case.initial)
    return init


@dataclass
class UcmConfig:
    mip_gap: float = 1e-3
    reserve_fraction: float | None = None
    shed_penalty: float | None = None
    window_energy_caps: dict[str, float] = field(default_factory=dict)
    time_limit: float | None = None
    threads: int = 1
    backend: str = "highs"
    network: str = "ptdf"  # "ptdf" (lazy line limits) | "angles"

    def options(self) -> SolveOptions:
        return SolveOptions(mip_gap=self.mip_gap, time_limit=self.time_limit,
                            threads=self.threads, backend=self.backend)

    def check(self, case: NetworkCase) -> None:
        if self.reserve_fraction is not None and not 0 <= self.reserve_fraction <= 0.5:
            raise ValueError("reserve_fraction must lie in [0, 0.5]")
        if self.shed_penalty is not None:
            top = max(b.marginal_cost for u in case.units for b in u.blocks)
            if self.shed_penalty <= top:
                raise ValueError("shed_penalty must exceed the largest block marginal cost")
        if self.network not in ("ptdf", "angles"):
            raise ValueError(f"unknown network mode {self.network!r}")


@dataclass
class CommitmentSolution:
    """Hourly commitment and dispatch. Arrays are indexed [entity, hour]."""

    unit_ids: tuple[str, ...]
    line_ids: tuple[str, ...]
    buses: tuple[int, ...]
    g: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    flow: np.ndarray
    angle: np.ndarray
    shed: np.ndarray
    cost_fixed: float = 0.0
    cost_startup: float = 0.0
    cost_variable: float = 0.0
    cost_shed: float = 0.0
    objective: float = math.nan
    mip_gap: float | None = None
    wall_seconds: float = 0.0

    @property
    def hours(self) -> int:
        return self.g.shape[1]

    @property
    def cost_total(self) -> float:
        return self.cost_fixed + self.cost_startup + self.cost_variable + self.cost_shed

    def slice(self, start: int, stop: int) -> CommitmentSolution:
        s = slice(start, stop)
        return CommitmentSolution(
            self.unit_ids, self.line_ids, self.buses, self.g[:, s], self.u[:, s], self.v[:, s],
            self.w[:, s], self.flow[:, s], self.angle[:, s], self.shed[:, s],
        )

    @classmethod
    def concatenate(cls, parts: list[CommitmentSolution]) -> CommitmentSolution:
        first = parts[0]
        return cls(
            first.unit_ids, first.line_ids, first.buses,
            *(np.concatenate([getattr(p, a) for p in parts], axis=1)
              for a in ("g", "u", "v", "w", "flow", "angle", "shed")),
        )

    def generation_by_unit(self) -> dict[str, float]:
        return {uid: float(math.fsum(self.g[i])) for i, uid in enumerate(self.unit_ids)}


def recompute_costs(case: NetworkCase, sol: CommitmentSolution,
                    shed_penalty: float | None = None) -> CommitmentSolution:
    """Fill the cost fields from primal values rather than the solver objective."""
    units = {u.id: u for u in case.units}
    fixed = startup = variable = 0.0
    for i, uid in enumerate(sol.unit_ids):
        unit = units[uid]
        fixed += unit.fixed_cost * float(sol.u[i].sum())
        startup += unit.startup_cost * float(sol.v[i].sum())
        variable += math.fsum(unit.variable_cost(np.clip(sol.g[i], 0.0, None)))
    sol.cost_fixed = fixed
    sol.cost_startup = startup
    sol.cost_variable = variable
    sol.cost_shed = (shed_penalty or 0.0) * float(sol.shed.sum())
    return sol


@dataclass
class UcmModel:
    model: Model
    hours: int
    g: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    blocks: list[list[list[int]]]  # [unit][hour] -> block var indices
    flow: np.ndarray | None
    angle: np.ndarray | None
    shed: np.ndarray | None


def _check_init(case: NetworkCase, init: InitialConditions) -> None:
    for unit in case.units:
        if unit.id not in init:
            raise ValueError(f"no initial state for unit {unit.id}")
        problems = initial_state_problems(unit, init[unit.id])
        if problems:
            raise ValueError(f"initial state of {unit.id}: {'; '.join(problems)}")


def window_caps(case: NetworkCase, hours: int, config: UcmConfig) -> dict[str, float]:
    """Energy caps per unit: explicit config caps, else budget pro rata over the month."""
    caps = {}
    for unit in case.units:
        if unit.id in config.window_energy_caps:
            caps[unit.id] = config.window_energy_caps[unit.id]
        elif unit.energy_budget is not None:
            caps[unit.id] = unit.energy_budget * min(hours, HOURS_PER_MONTH) / HOURS_PER_MONTH
    return caps


def build_ucm(case: NetworkCase, demand: DemandSeries, hours: int,
              init: InitialConditions, config: UcmConfig,
              monitored: set[tuple[int, int]] | None = None) -> UcmModel:
    """Assemble the commitment MILP for the first ``hours`` hours of ``demand``.

    With ``config.network == "angles"`` line flows and bus angles are model
    columns. With ``"ptdf"`` only the (line, hour) pairs in ``monitored``
    carry limit rows; :func:`solve_ucm` grows that set until no line is
    overloaded.
    """
    if hours > demand.horizon_hours:
        raise ValueError(f"window of {hours} h exceeds demand horizon of {demand.horizon_hours} h")
    if hours < 1:
        raise ValueError("window must cover at least one hour")
    _check_init(case, init)
    config.check(case)
    demand = demand.for_case(case)
    d = demand.values[:, :hours]

    m = Model(name=f"ucm-{case.name}-{hours}h")
    n_units, T = len(case.units), hours
    g = np.zeros((n_units, T), dtype=int)
    u = np.zeros_like(g)
    v = np.zeros_like(g)
    w = np.zeros_like(g)
    blocks: list[list[list[int]]] = []

    for i, unit in enumerate(case.units):
        blocks.append([])
        for t in range(T):
            u[i, t] = m.add_var(binary=True, cost=unit.fixed_cost, name=f"u[{unit.id},{t}]").index
            v[i, t] = m.add_var(binary=True, cost=unit.startup_cost, name=f"v[{unit.id},{t}]").index
            w[i, t] = m.add_var(binary=True, name=f"w[{unit.id},{t}]").index
            ks = [m.add_var(0.0, b.size_mw, cost=b.marginal_cost, name=f"g[{unit.id},{t},{k}]").index
                  for k, b in enumerate(unit.blocks)]
            blocks[i].append(ks)
            g[i, t] = m.add_var(0.0, unit.p_max, name=f"g[{unit.id},{t}]").index

    caps = window_caps(case, T, config)
    for i, unit in enumerate(case.units):
        s0 = init[unit.id]
        for t in range(T):
            m.add_constraint([(g[i, t], 1.0)] + [(k, -1.0) for k in blocks[i][t]], EQ, 0.0)
            m.add_constraint([(g[i, t], 1.0), (u[i, t], -unit.p_min)], GE, 0.0)
            m.add_constraint([(g[i, t], 1.0), (u[i, t], -unit.p_max)], LE, 0.0)
            # state transition
            if t == 0:
                m.add_constraint([(u[i, 0], 1.0), (v[i, 0], -1.0), (w[i, 0], 1.0)], EQ, float(s0.u0))
            else:
                m.add_constraint([(u[i, t], 1.0), (u[i, t - 1], -1.0), (v[i, t], -1.0),
                                  (w[i, t], 1.0)], EQ, 0.0)
            m.add_constraint([(v[i, t], 1.0), (w[i, t], 1.0)], LE, 1.0)
            # ramping, with start-up / shut-down allowances
            if t == 0:
                m.add_constraint([(g[i, 0], 1.0), (v[i, 0], -unit.startup_ramp)], LE,
                                 s0.g0 + unit.ramp_up * s0.u0)
                m.add_constraint([(g[i, 0], -1.0), (u[i, 0], -unit.ramp_down),
                                  (w[i, 0], -unit.shutdown_ramp)], LE, -s0.g0)
            else:
                m.add_constraint([(g[i, t], 1.0), (g[i, t - 1], -1.0), (u[i, t - 1], -unit.ramp_up),
                                  (v[i, t], -unit.startup_ramp)], LE, 0.0)
                m.add_constraint([(g[i, t - 1], 1.0), (g[i, t], -1.0), (u[i, t], -unit.ramp_down),
                                  (w[i, t], -unit.shutdown_ramp)], LE, 0.0)
            # minimum up / down time inside the window
            lo = max(0, t - unit.min_up + 1)
            if unit.min_up > 1:
                m.add_constraint([(v[i, tau], 1.0) for tau in range(lo, t + 1)] + [(u[i, t], -1.0)],
                                 LE, 0.0)
            lo = max(0, t - unit.min_down + 1)
            if unit.min_down > 1:
                m.add_constraint([(w[i, tau], 1.0) for tau in range(lo, t + 1)] + [(u[i, t], 1.0)],
                                 LE, 1.0)
        # Valid inequalities implied by the ramp rows: output is at most the
        # start-up allowance in a start-up hour and at most the shut-down
        # allowance in the hour before a shut-down. They only tighten the LP.
        su_gap = unit.p_max - min(unit.startup_ramp, unit.p_max)
        sd_gap = unit.p_max - min(unit.shutdown_ramp, unit.p_max)
        for t in range(T):
            nxt = w[i, t + 1] if t + 1 < T else None
            if unit.min_up > 1 and nxt is not None:
                m.add_constraint([(g[i, t], 1.0), (u[i, t], -unit.p_max), (v[i, t], su_gap),
                                  (nxt, sd_gap)], LE, 0.0)
            else:
                if su_gap > 0:
                    m.add_constraint([(g[i, t], 1.0), (u[i, t], -unit.p_max), (v[i, t], su_gap)],
                                     LE, 0.0)
                if sd_gap > 0 and nxt is not None:
                    m.add_constraint([(g[i, t], 1.0), (u[i, t], -unit.p_max), (nxt, sd_gap)],
                                     LE, 0.0)
        # carry over up/down time owed from before the window
        for t in _forced_hours(unit, s0, T):
            m.fix(u[i, t], float(s0.u0))
        if unit.id in caps:
            m.add_constraint([(g[i, t], 1.0) for t in range(T)], LE, caps[unit.id])

    flow = angle = shed = None
    pos = case.bus_position()
    if config.shed_penalty is not None:
        shed = np.array([[m.add_var(0.0, float(d[k, t]), cost=config.shed_penalty,
                                    name=f"shed[{b},{t}]").index for t in range(T)]
                         for k, b in enumerate(case.buses)], dtype=int)
    at_bus: dict[int, list[int]] = {b: [] for b in case.buses}
    for i, unit in enumerate(case.units):
        at_bus[unit.bus].append(i)

    if case.lines and config.network == "angles":
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
        for k, b in enumerate(case.buses):
            inflow = [l for l, ln in enumerate(case.lines) if ln.to_bus == b]
            outflow = [l for l, ln in enumerate(case.lines) if ln.from_bus == b]
            for t in range(T):
                terms = [(g[i, t], 1.0) for i in at_bus[b]]
                terms += [(flow[l, t], 1.0) for l in inflow] + [(flow[l, t], -1.0) for l in outflow]
                if shed is not None:
                    terms.append((shed[k, t], 1.0))
                m.add_constraint(terms, EQ, float(d[k, t]))
    elif case.lines:
        # system balance plus PTDF limits for the monitored (line, hour) pairs;
        # with every pair monitored this is the same feasible set as "angles"
        system = d.sum(axis=0)
        for t in range(T):
            terms = [(g[i, t], 1.0) for i in range(n_units)]
            if shed is not None:
                terms += [(shed[k, t], 1.0) for k in range(len(case.buses))]
            m.add_constraint(terms, EQ, float(system[t]))
        ptdf = ptdf_matrix(case)
        for l, t in sorted(monitored or ()):
            ln = case.lines[l]
            terms = [(g[i, t], ptdf[l, pos[unit.bus]]) for i, unit in enumerate(case.units)
                     if abs(ptdf[l, pos[unit.bus]]) > 1e-12]
            if shed is not None:
                terms += [(shed[k, t], ptdf[l, k]) for k in range(len(case.buses))
                          if abs(ptdf[l, k]) > 1e-12]
            if not terms:
                continue
            offset = float(ptdf[l] @ d[:, t])
            m.add_constraint(terms, LE, ln.capacity + offset)
            m.add_constraint(terms, GE, -ln.capacity + offset)
    else:
        for k, b in enumerate(case.buses):
            for t in range(T):
                terms = [(g[i, t], 1.0) for i in at_bus[b]]
                if shed is not None:
                    terms.append((shed[k, t], 1.0))
                if not terms:
                    if d[k, t] > TOL:
                        raise InfeasibleError(f"bus {b} has demand but no supply path", hour=t)
                    continue
                m.add_constraint(terms, EQ, float(d[k, t]))

    if config.reserve_fraction:
        system = d.sum(axis=0)
        for t in range(T):
            terms = []
            for i, unit in enumerate(case.units):
                terms += [(u[i, t], unit.p_max), (g[i, t], -1.0)]
            m.add_constraint(terms, GE, config.reserve_fraction * float(system[t]))

    return UcmModel(m, T, g, u, v, w, blocks, flow, angle, shed)


def _forced_hours(unit, s0: UnitState, T: int) -> range:
    if s0.u0 == 1:
        return range(min(T, max(0, unit.min_up - s0.ut0)))
    return range(min(T, max(0, unit.min_down - s0.dt0)))


def ptdf_matrix(case: NetworkCase) -> np.ndarray:
    """Line flow (MW) per MW injected at each bus and withdrawn at the reference bus."""
    angles = injection_angles(case)
    pos = case.bus_position()
    out = np.zeros((len(case.lines), len(case.buses)))
    for l, ln in enumerate(case.lines):
        out[l] = case.base_mva * ln.susceptance * (angles[pos[ln.from_bus]] - angles[pos[ln.to_bus]])
    return out


def injection_angles(case: NetworkCase) -> np.ndarray:
    """Bus angles (rad) per MW of injection at each bus; column k is bus k."""
    n = len(case.buses)
    pos = case.bus_position()
    bbus = np.zeros((n, n))
    for ln in case.lines:
        b = case.base_mva * ln.susceptance
        f, t = pos[ln.from_bus], pos[ln.to_bus]
        bbus[f, f] += b
        bbus[t, t] += b
        bbus[f, t] -= b
        bbus[t, f] -= b
    keep = [k for k in range(n) if k != pos[case.reference_bus]]
    out = np.zeros((n, n))
    out[np.ix_(keep, keep)] = np.linalg.inv(bbus[np.ix_(keep, keep)])
    return out


def dc_power_flow(case: NetworkCase, injection: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angles [bus, hour] and line flows [line, hour] for net bus injections in MW."""
    angle = injection_angles(case) @ injection
    pos = case.bus_position()
    flow = np.array([case.base_mva * ln.susceptance
                     * (angle[pos[ln.from_bus]] - angle[pos[ln.to_bus]]) for ln in case.lines])
    return angle, flow.reshape(len(case.lines), injection.shape[1])


def extract_solution(case: NetworkCase, demand: DemandSeries, built: UcmModel,
                     result: SolveResult, config: UcmConfig) -> CommitmentSolution:
    x = result.values
    T = built.hours
    n_bus = len(case.buses)
    g = x[built.g]
    shed = x[built.shed] if built.shed is not None else np.zeros((n_bus, T))
    if built.flow is not None:
        flow, angle = x[built.flow], x[built.angle]
    elif case.lines:
        angle, flow = dc_power_flow(case, net_injection(case, demand, g, shed))
    else:
        flow, angle = np.zeros((0, T)), np.zeros((n_bus, T))
    sol = CommitmentSolution(
        unit_ids=tuple(u.id for u in case.units),
        line_ids=tuple(ln.id for ln in case.lines),
        buses=tuple(case.buses),
        g=g,
        u=np.rint(x[built.u]).astype(int),
        v=np.rint(x[built.v]).astype(int),
        w=np.rint(x[built.w]).astype(int),
        flow=flow,
        angle=angle,
        shed=shed,
        objective=result.objective,
        mip_gap=result.mip_gap,
        wall_seconds=result.wall_seconds,
    )
    return recompute_costs(case, sol, config.shed_penalty)


def net_injection(case: NetworkCase, demand: DemandSeries, g: np.ndarray,
                  shed: np.ndarray) -> np.ndarray:
    T = g.shape[1]
    pos = case.bus_position()
    inj = shed - demand.for_case(case).values[:, :T]
    for i, unit in enumerate(case.units):
        inj[pos[unit.bus]] += g[i]
    return inj


def solve_ucm(case: NetworkCase, demand: DemandSeries, hours: int,
              init: InitialConditions, config: UcmConfig | None = None,
              max_rounds: int = 25) -> CommitmentSolution:
    """Optimal commitment for the window; costs are recomputed from the primal values."""
    config = config or UcmConfig()
    lazy = bool(case.lines) and config.network == "ptdf"
    monitored: set[tuple[int, int]] = set()
    ptdf = ptdf_matrix(case) if lazy else None
    caps = np.array([ln.capacity for ln in case.lines])[:, None]
    total_seconds = 0.0
    for _ in range(max_rounds):
        built = build_ucm(case, demand, hours, init, config, monitored)
        result = build_and_solve(built.model, config.options())
        total_seconds += result.wall_seconds
        if result.status == INFEASIBLE:
            raise InfeasibleError(_diagnose(case, demand, hours, init, config),
                                  hour=_first_short_hour(case, demand, hours, init, config))
        if not result.ok:
            raise RuntimeError(f"UCM solve ended with status {result.status}")
        if not lazy:
            break
        g = result.values[built.g]
        shed = result.values[built.shed] if built.shed is not None else 0.0
        flow = ptdf @ net_injection(case, demand, g, np.zeros((len(case.buses), hours)) + shed)
        over = {(int(l), int(t)) for l, t in zip(*np.nonzero(np.abs(flow) > caps + 1e-7))}
        if not over - monitored:
            break
        monitored |= over
    else:
        raise RuntimeError(f"line limits still violated after {max_rounds} rounds")
    sol = extract_solution(case, demand, built, result, config)
    sol.wall_seconds = total_seconds
    return sol


def _first_short_hour(case, demand, hours, init, config) -> int | None:
    if config.shed_penalty is not None:
        return None
    probe = UcmConfig(**{**config.__dict__, "shed_penalty": _probe_penalty(case)})
    try:
        built = build_ucm(case, demand, hours, init, probe)
        result = build_and_solve(built.model, probe.options())
    except Exception:
        return None
    if not result.ok:
        return None
    shed = result.values[built.shed].sum(axis=0)
    short = np.flatnonzero(shed > TOL)
    return int(short[0]) if short.size else None


def _probe_penalty(case: NetworkCase) -> float:
    top = max(b.marginal_cost for u in case.units for b in u.blocks)
    return 1000.0 * max(top, 1.0)


def _diagnose(case, demand, hours, init, config) -> str:
    hour = _first_short_hour(case, demand, hours, init, config)
    if hour is None:
        return "UCM infeasible"
    return f"UCM infeasible: demand cannot be served at hour {hour}"


def audit_solution(case: NetworkCase, demand: DemandSeries, solution: CommitmentSolution,
                   init: InitialConditions, config: UcmConfig | None = None,
                   tol: float = TOL) -> list[str]:
    """Check every UCM constraint family on ``solution``; one message per violation."""
    problems: list[str] = []
    T = solution.hours
    if demand.horizon_hours < T:
        return [f"demand covers {demand.horizon_hours} h, solution {T} h"]
    if tuple(u.id for u in case.units) != solution.unit_ids:
        return ["solution units do not match case"]
    if tuple(ln.id for ln in case.lines) != solution.line_ids:
        return ["solution lines do not match case"]
    d = demand.for_case(case).values[:, :T]
    g, u, v, w = solution.g, solution.u, solution.v, solution.w

    for i, unit in enumerate(case.units):
        s0 = init[unit.id]
        name = unit.id
        for arr, label in ((u, "u"), (v, "v"), (w, "w")):
            bad = np.flatnonzero((arr[i] != 0) & (arr[i] != 1))
            for t in bad:
                problems.append(f"unit {name} hour {t}: {label} not binary")
        prev_u = np.concatenate([[s0.u0], u[i, :-1]])
        prev_g = np.concatenate([[s0.g0], g[i, :-1]])
        for t in range(T):
            if u[i, t] - prev_u[t] != v[i, t] - w[i, t]:
                problems.append(f"unit {name} hour {t}: state transition u-u_prev != v-w")
            if v[i, t] + w[i, t] > 1:
                problems.append(f"unit {name} hour {t}: start-up and shut-down together")
            if g[i, t] < unit.p_min * u[i, t] - tol:
                problems.append(f"unit {name} hour {t}: output {g[i, t]:.6f} below p_min")
            if g[i, t] > unit.p_max * u[i, t] + tol:
                problems.append(f"unit {name} hour {t}: output {g[i, t]:.6f} above p_max*u")
            up = g[i, t] - prev_g[t]
            if up > unit.ramp_up * prev_u[t] + unit.startup_ramp * v[i, t] + tol:
                problems.append(f"unit {name} hour {t}: ramp-up {up:.6f} MW exceeds limit")
            down = prev_g[t] - g[i, t]
            if down > unit.ramp_down * u[i, t] + unit.shutdown_ramp * w[i, t] + tol:
                problems.append(f"unit {name} hour {t}: ramp-down {down:.6f} MW exceeds limit")
            lo = max(0, t - unit.min_up + 1)
            if v[i, lo:t + 1].sum() > u[i, t]:
                problems.append(f"unit {name} hour {t}: minimum up time violated")
            lo = max(0, t - unit.min_down + 1)
            if w[i, lo:t + 1].sum() > 1 - u[i, t]:
                problems.append(f"unit {name} hour {t}: minimum down time violated")
        for t in _forced_hours(unit, s0, T):
            if u[i, t] != s0.u0:
                problems.append(f"unit {name} hour {t}: carried-over up/down time violated")

    pos = case.bus_position()
    net = np.zeros_like(d)
    for i, unit in enumerate(case.units):
        net[pos[unit.bus]] += g[i]
    if case.lines:
        ref = pos[case.reference_bus]
        for t in np.flatnonzero(np.abs(solution.angle[ref]) > tol):
            problems.append(f"reference bus angle nonzero at hour {t}")
        for l, ln in enumerate(case.lines):
            f = solution.flow[l]
            dc = case.base_mva * ln.susceptance * (solution.angle[pos[ln.from_bus]]
                                                  - solution.angle[pos[ln.to_bus]])
            for t in np.flatnonzero(np.abs(f - dc) > tol):
                problems.append(f"line {ln.id} hour {t}: flow {f[t]:.6f} != DC flow {dc[t]:.6f}")
            for t in np.flatnonzero(np.abs(f) > ln.capacity + tol):
                problems.append(f"line {ln.id} hour {t}: |flow| {abs(f[t]):.6f} exceeds capacity")
            net[pos[ln.to_bus]] += f
            net[pos[ln.from_bus]] -= f
    net += solution.shed
    gap = net - d
    for k, t in zip(*np.nonzero(np.abs(gap) > tol)):
        problems.append(f"bus {case.buses[k]} hour {t}: balance off by {gap[k, t]:.6f} MW")

    if config is not None:
        if config.reserve_fraction:
            pmax = np.array([x.p_max for x in case.units])[:, None]
            head = (pmax * u - g).sum(axis=0)
            need = config.reserve_fraction * d.sum(axis=0)
            for t in np.flatnonzero(head < need - tol):
                problems.append(f"hour {t}: spinning reserve short by {need[t] - head[t]:.6f} MW")
        for i, unit in enumerate(case.units):
            cap = window_caps(case, T, config).get(unit.id)
            if cap is not None and g[i].sum() > cap + tol:
                problems.append(f"unit {unit.id}: energy {g[i].sum():.3f} MWh exceeds cap {cap:.3f}")
    return problems


# --- archive -----------------------------------------------------------------

UNIT_HEADER = "unit,hour,u,v,w,g_mw"
LINE_HEADER = "line,hour,flow_mw"
ANGLE_HEADER = "bus,hour,angle_rad"
COST_HEADER = "cost,value"


def emit_solution(sol: CommitmentSolution) -> str:
    out = io.StringIO()
    out.write(UNIT_HEADER + "\n")
    for i, uid in enumerate(sol.unit_ids):
        for t in range(sol.hours):
            out.write(f"{uid},{t},{sol.u[i, t]},{sol.v[i, t]},{sol.w[i, t]},{float(sol.g[i, t])!r}\n")
    out.write("\n" + LINE_HEADER + "\n")
    for l, lid in enumerate(sol.line_ids):
        for t in range(sol.hours):
            out.write(f"{lid},{t},{float(sol.flow[l, t])!r}\n")
    out.write("\n" + ANGLE_HEADER + "\n")
    for k, b in enumerate(sol.buses):
        for t in range(sol.hours):
            out.write(f"{b},{t},{float(sol.angle[k, t])!r}\n")
    out.write("\n" + COST_HEADER + "\n")
    for name in ("cost_fixed", "cost_startup", "cost_variable", "cost_shed", "cost_total"):
        out.write(f"{name},{float(getattr(sol, name))!r}\n")
    return out.getvalue()


def _blocks(text: str) -> dict[str, list[list[str]]]:
    found: dict[str, list[list[str]]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            current = None
            continue
        if current is None:
            current = line
            found[current] = []
            continue
        found[current].append(line.split(","))
    return found


def parse_solution(text: str, case: NetworkCase) -> CommitmentSolution:
    blocks = _blocks(text)
    if UNIT_HEADER not in blocks:
        raise ValueError(f"solution archive lacks a '{UNIT_HEADER}' table")
    unit_rows = blocks[UNIT_HEADER]
    T = 1 + max(int(r[1]) for r in unit_rows)
    uidx = {u.id: i for i, u in enumerate(case.units)}
    n = len(case.units)
    g = np.zeros((n, T))
    u, v, w = (np.zeros((n, T), dtype=int) for _ in range(3))
    for r in unit_rows:
        i, t = uidx[r[0]], int(r[1])
        u[i, t], v[i, t], w[i, t] = int(r[2]), int(r[3]), int(r[4])
        g[i, t] = float(r[5])
    lidx = {ln.id: l for l, ln in enumerate(case.lines)}
    flow = np.zeros((len(case.lines), T))
    for r in blocks.get(LINE_HEADER, []):
        flow[lidx[r[0]], int(r[1])] = float(r[2])
    pos = case.bus_position()
    angle = np.zeros((len(case.buses), T))
    for r in blocks.get(ANGLE_HEADER, []):
        angle[pos[int(r[0])], int(r[1])] = float(r[2])
    sol = CommitmentSolution(tuple(uidx), tuple(lidx), tuple(case.buses), g, u, v, w, flow, angle,
                             np.zeros((len(case.buses), T)))
    return recompute_costs(case, sol)


def save_solution(sol: CommitmentSolution, path: str | Path) -> None:
    Path(path).write_text(emit_solution(sol))
