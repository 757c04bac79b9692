"""Power system description: buses, lines, generator fleet, and the case file.

Case file layout (one record per line, comma separated, ``#`` comments)::

    [meta]
    name,<text>
    reference_bus,<int>
    base_mva,<float>              # optional, default 100

    [buses]
    <index>

    [lines]
    <id>,<from_bus>,<to_bus>,<susceptance_pu>,<capacity_mw>

    [generators]
    <id>,<bus>,<fuel>,<p_min>,<p_max>,<ramp_up>,<ramp_down>,<min_up>,<min_down>,
    <startup_cost>,<fixed_cost>,<blocks>,<energy_budget>

    [shares]
    <bus>,<fraction>

    [initial]                     # optional
    <unit>,<u0>,<g0>,<ut0>,<dt0>

``blocks`` is ``size:cost|size:cost|...`` and ``energy_budget`` may be left
empty. Line flow in MW is ``base_mva * susceptance * (theta_from - theta_to)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

FUELS = ("nuclear", "hydro", "coal", "gas")
HOURS_PER_MONTH = 720

SECTIONS = ("meta", "buses", "lines", "generators", "shares", "initial")


class CaseFormatError(ValueError):
    """Malformed case file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class CostBlock:
    size_mw: float
    marginal_cost: float


@dataclass(frozen=True)
class GeneratorUnit:
    id: str
    bus: int
    fuel: str
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    min_up: int
    min_down: int
    startup_cost: float
    fixed_cost: float
    blocks: tuple[CostBlock, ...]
    energy_budget: float | None = None

    @property
    def startup_ramp(self) -> float:
        return max(self.p_min, self.ramp_up)

    @property
    def shutdown_ramp(self) -> float:
        return max(self.p_min, self.ramp_down)

    def variable_cost(self, g: float | np.ndarray) -> float | np.ndarray:
        """Block cost of producing ``g`` MW, filling cheapest blocks first."""
        g = np.asarray(g, dtype=float)
        cost = np.zeros_like(g)
        filled = 0.0
        for b in self.blocks:
            part = np.clip(g - filled, 0.0, b.size_mw)
            cost = cost + part * b.marginal_cost
            filled += b.size_mw
        return cost if cost.ndim else float(cost)


@dataclass(frozen=True)
class TransmissionLine:
    id: str
    from_bus: int
    to_bus: int
    susceptance: float
    capacity: float


@dataclass(frozen=True)
class UnitState:
    """Initial state of one unit at the start of a horizon."""

    u0: int
    g0: float
    ut0: int
    dt0: int


@dataclass(frozen=True)
class NetworkCase:
    buses: tuple[int, ...]
    lines: tuple[TransmissionLine, ...]
    units: tuple[GeneratorUnit, ...]
    reference_bus: int
    demand_share: dict[int, float]
    name: str = "case"
    base_mva: float = 100.0
    initial: dict[str, UnitState] = field(default_factory=dict)

    def unit(self, unit_id: str) -> GeneratorUnit:
        for u in self.units:
            if u.id == unit_id:
                return u
        raise KeyError(unit_id)

    def bus_position(self) -> dict[int, int]:
        return {b: k for k, b in enumerate(self.buses)}

    def share_vector(self) -> np.ndarray:
        return np.array([self.demand_share.get(b, 0.0) for b in self.buses])

    @property
    def total_capacity(self) -> float:
        return sum(u.p_max for u in self.units)

    def capacity_share(self, fuel: str) -> float:
        return sum(u.p_max for u in self.units if u.fuel == fuel) / self.total_capacity


def _split(line: str) -> list[str]:
    return [f.strip() for f in line.split(",")]


def _num(text: str, lineno: int, name: str, kind=float):
    try:
        value = kind(text)
    except ValueError:
        raise CaseFormatError(f"expected {kind.__name__}, got {text!r}", lineno, name) from None
    if kind is float and not math.isfinite(value):
        raise CaseFormatError(f"non-finite value {text!r}", lineno, name)
    return value


def _parse_blocks(text: str, lineno: int) -> tuple[CostBlock, ...]:
    blocks = []
    for part in text.split("|"):
        pieces = part.split(":")
        if len(pieces) != 2:
            raise CaseFormatError(f"bad block {part!r}, expected size:cost", lineno, "blocks")
        blocks.append(
            CostBlock(_num(pieces[0], lineno, "blocks"), _num(pieces[1], lineno, "blocks"))
        )
    return tuple(blocks)


_ARITY = {"buses": 1, "lines": 5, "generators": 13, "shares": 2, "initial": 5}


def parse_case(text: str) -> NetworkCase:
    """Parse case-file content into a :class:`NetworkCase`.

    Raises :class:`CaseFormatError` on syntax errors, duplicate ids and
    references to undeclared buses or units. Invariants that are about
    values rather than structure are left to :func:`validate_case`.
    """
    section = None
    meta: dict[str, tuple[str, int]] = {}
    buses: list[int] = []
    lines: list[TransmissionLine] = []
    units: list[GeneratorUnit] = []
    shares: dict[int, float] = {}
    initial: dict[str, UnitState] = {}
    refs: list[tuple[int, int, str]] = []  # (bus, lineno, field)
    init_refs: list[tuple[str, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise CaseFormatError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise CaseFormatError("record outside of any section", lineno)
        fields = _split(line)
        if section == "meta":
            if len(fields) != 2:
                raise CaseFormatError("meta records are key,value", lineno)
            meta[fields[0]] = (fields[1], lineno)
            continue
        if len(fields) != _ARITY[section]:
            raise CaseFormatError(
                f"[{section}] expects {_ARITY[section]} fields, got {len(fields)}", lineno
            )
        if section == "buses":
            b = _num(fields[0], lineno, "index", int)
            if b in buses:
                raise CaseFormatError(f"duplicate bus {b}", lineno, "index")
            buses.append(b)
        elif section == "lines":
            lid = fields[0]
            if any(x.id == lid for x in lines):
                raise CaseFormatError(f"duplicate line id {lid!r}", lineno, "id")
            ln = TransmissionLine(
                lid,
                _num(fields[1], lineno, "from_bus", int),
                _num(fields[2], lineno, "to_bus", int),
                _num(fields[3], lineno, "susceptance"),
                _num(fields[4], lineno, "capacity"),
            )
            refs += [(ln.from_bus, lineno, "from_bus"), (ln.to_bus, lineno, "to_bus")]
            lines.append(ln)
        elif section == "generators":
            gid = fields[0]
            if any(x.id == gid for x in units):
                raise CaseFormatError(f"duplicate generator id {gid!r}", lineno, "id")
            budget = fields[12]
            unit = GeneratorUnit(
                id=gid,
                bus=_num(fields[1], lineno, "bus", int),
                fuel=fields[2].lower(),
                p_min=_num(fields[3], lineno, "p_min"),
                p_max=_num(fields[4], lineno, "p_max"),
                ramp_up=_num(fields[5], lineno, "ramp_up"),
                ramp_down=_num(fields[6], lineno, "ramp_down"),
                min_up=_num(fields[7], lineno, "min_up", int),
                min_down=_num(fields[8], lineno, "min_down", int),
                startup_cost=_num(fields[9], lineno, "startup_cost"),
                fixed_cost=_num(fields[10], lineno, "fixed_cost"),
                blocks=_parse_blocks(fields[11], lineno),
                energy_budget=_num(budget, lineno, "energy_budget") if budget else None,
            )
            refs.append((unit.bus, lineno, "bus"))
            units.append(unit)
        elif section == "shares":
            b = _num(fields[0], lineno, "bus", int)
            if b in shares:
                raise CaseFormatError(f"duplicate share for bus {b}", lineno, "bus")
            shares[b] = _num(fields[1], lineno, "fraction")
            refs.append((b, lineno, "bus"))
        elif section == "initial":
            uid = fields[0]
            if uid in initial:
                raise CaseFormatError(f"duplicate initial state for {uid!r}", lineno, "unit")
            initial[uid] = UnitState(
                u0=_num(fields[1], lineno, "u0", int),
                g0=_num(fields[2], lineno, "g0"),
                ut0=_num(fields[3], lineno, "ut0", int),
                dt0=_num(fields[4], lineno, "dt0", int),
            )
            init_refs.append((uid, lineno))

    if "reference_bus" not in meta:
        raise CaseFormatError("[meta] reference_bus is required")
    ref_text, ref_line = meta["reference_bus"]
    reference_bus = _num(ref_text, ref_line, "reference_bus", int)
    refs.append((reference_bus, ref_line, "reference_bus"))
    base_mva = 100.0
    if "base_mva" in meta:
        base_mva = _num(meta["base_mva"][0], meta["base_mva"][1], "base_mva")

    known = set(buses)
    for b, lineno, name in refs:
        if b not in known:
            raise CaseFormatError(f"reference to undeclared bus {b}", lineno, name)
    unit_ids = {u.id for u in units}
    for uid, lineno in init_refs:
        if uid not in unit_ids:
            raise CaseFormatError(f"initial state for unknown unit {uid!r}", lineno, "unit")

    return NetworkCase(
        buses=tuple(buses),
        lines=tuple(lines),
        units=tuple(units),
        reference_bus=reference_bus,
        demand_share=shares,
        name=meta.get("name", ("case", 0))[0],
        base_mva=base_mva,
        initial=initial,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_case(case: NetworkCase) -> str:
    out = ["[meta]", f"name,{case.name}", f"reference_bus,{case.reference_bus}",
           f"base_mva,{_fmt(case.base_mva)}", "", "[buses]"]
    out += [str(b) for b in case.buses]
    out += ["", "[lines]"]
    for ln in case.lines:
        out.append(f"{ln.id},{ln.from_bus},{ln.to_bus},{_fmt(ln.susceptance)},{_fmt(ln.capacity)}")
    out += ["", "[generators]"]
    for u in case.units:
        blocks = "|".join(f"{_fmt(b.size_mw)}:{_fmt(b.marginal_cost)}" for b in u.blocks)
        budget = "" if u.energy_budget is None else _fmt(u.energy_budget)
        out.append(
            f"{u.id},{u.bus},{u.fuel},{_fmt(u.p_min)},{_fmt(u.p_max)},{_fmt(u.ramp_up)},"
            f"{_fmt(u.ramp_down)},{u.min_up},{u.min_down},{_fmt(u.startup_cost)},"
            f"{_fmt(u.fixed_cost)},{blocks},{budget}"
        )
    out += ["", "[shares]"]
    out += [f"{b},{_fmt(f)}" for b, f in case.demand_share.items()]
    if case.initial:
        out += ["", "[initial]"]
        for uid, s in case.initial.items():
            out.append(f"{uid},{s.u0},{_fmt(s.g0)},{s.ut0},{s.dt0}")
    return "\n".join(out) + "\n"


def load_case(path: str | Path) -> NetworkCase:
    return parse_case(Path(path).read_text())


def validate_case(case: NetworkCase) -> list[str]:
    """Return one message per broken invariant; empty when the case is sound."""
    problems: list[str] = []
    tol = 1e-6

    if len(set(case.buses)) != len(case.buses):
        problems.append("buses: duplicate bus index")
    if case.reference_bus not in case.buses:
        problems.append(f"reference_bus {case.reference_bus}: not a declared bus")

    for u in case.units:
        tag = f"unit {u.id}"
        if u.fuel not in FUELS:
            problems.append(f"{tag}: fuel {u.fuel!r} not one of {', '.join(FUELS)}")
        if u.bus not in case.buses:
            problems.append(f"{tag}: bus {u.bus} not declared")
        if not 0 <= u.p_min <= u.p_max:
            problems.append(f"{tag}: requires 0 <= p_min <= p_max (p_min={u.p_min}, p_max={u.p_max})")
        if not u.blocks:
            problems.append(f"{tag}: no cost blocks")
        else:
            if any(b.size_mw <= 0 for b in u.blocks):
                problems.append(f"{tag}: block size_mw must be > 0")
            if abs(sum(b.size_mw for b in u.blocks) - u.p_max) > tol:
                problems.append(f"{tag}: block sizes sum to {sum(b.size_mw for b in u.blocks)}, not p_max")
            costs = [b.marginal_cost for b in u.blocks]
            if any(c2 < c1 for c1, c2 in zip(costs, costs[1:])):
                problems.append(f"{tag}: block marginal costs must be nondecreasing")
            if any(c < 0 for c in costs):
                problems.append(f"{tag}: negative block marginal cost")
        if u.ramp_up <= 0 or u.ramp_down <= 0:
            problems.append(f"{tag}: ramp_up and ramp_down must be > 0")
        if u.min_up < 1 or u.min_down < 1:
            problems.append(f"{tag}: min_up and min_down must be >= 1")
        if u.startup_cost < 0 or u.fixed_cost < 0:
            problems.append(f"{tag}: negative startup or fixed cost")
        if u.energy_budget is not None and not 0 <= u.energy_budget <= u.p_max * HOURS_PER_MONTH:
            problems.append(f"{tag}: energy_budget must lie in [0, p_max*{HOURS_PER_MONTH}]")

    for ln in case.lines:
        tag = f"line {ln.id}"
        if ln.from_bus == ln.to_bus:
            problems.append(f"{tag}: from_bus equals to_bus")
        if ln.susceptance <= 0:
            problems.append(f"{tag}: susceptance must be > 0")
        if ln.capacity <= 0:
            problems.append(f"{tag}: capacity must be > 0")
        for b in (ln.from_bus, ln.to_bus):
            if b not in case.buses:
                problems.append(f"{tag}: bus {b} not declared")

    if case.buses and not _connected(case):
        problems.append("network: bus graph is not connected")

    for b, f in case.demand_share.items():
        if b not in case.buses:
            problems.append(f"share for bus {b}: bus not declared")
        if f < 0:
            problems.append(f"share for bus {b}: negative fraction")
    total = math.fsum(case.demand_share.values())
    if abs(total - 1.0) > 1e-9:
        problems.append(f"demand_share: fractions sum to {total!r}, expected 1")

    ids = {u.id: u for u in case.units}
    for uid, s in case.initial.items():
        u = ids.get(uid)
        if u is None:
            problems.append(f"initial {uid}: unknown unit")
            continue
        problems += [f"initial {uid}: {m}" for m in initial_state_problems(u, s)]
    return problems


def initial_state_problems(unit: GeneratorUnit, s: UnitState) -> list[str]:
    out = []
    if s.u0 not in (0, 1):
        out.append("u0 must be 0 or 1")
    elif s.u0 == 1:
        if not unit.p_min - 1e-6 <= s.g0 <= unit.p_max + 1e-6:
            out.append(f"online with g0={s.g0} outside [p_min, p_max]")
        if s.dt0 != 0:
            out.append("online unit must have dt0 = 0")
        if s.ut0 < 0:
            out.append("ut0 must be >= 0")
    else:
        if abs(s.g0) > 1e-6:
            out.append("offline unit must have g0 = 0")
        if s.ut0 != 0:
            out.append("offline unit must have ut0 = 0")
        if s.dt0 < 0:
            out.append("dt0 must be >= 0")
    return out


def _connected(case: NetworkCase) -> bool:
    pos = case.bus_position()
    edges = [(pos[ln.from_bus], pos[ln.to_bus]) for ln in case.lines
             if ln.from_bus in pos and ln.to_bus in pos]
    n = len(case.buses)
    if not edges:
        return n == 1
    rows, cols = zip(*edges)
    graph = coo_matrix((np.ones(len(edges)), (rows, cols)), shape=(n, n))
    count, _ = connected_components(graph, directed=False)
    return count == 1


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled data file (``rts24.case``, ``demand_history.csv``, ...)."""
    return Path(str(resources.files("seasonplan") / "data" / name))


def bundled_case() -> NetworkCase:
    return load_case(bundled_path("rts24.case"))
