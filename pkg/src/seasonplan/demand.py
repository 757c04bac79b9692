"""Hourly demand series and the PF / PFML monthly forecasts.

A month is a block of 30 days (720 hours); month ``m`` (1-based) of a
history covers hours ``[(m - 1) * 720, m * 720)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .system import HOURS_PER_MONTH, NetworkCase

HOURS_PER_DAY = 24
DAYS_PER_MONTH = 30


class DemandFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DemandSeries:
    """Per-bus hourly demand. ``values[k, t]`` is MW at ``buses[k]``, hour ``t``."""

    buses: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != len(self.buses):
            raise ValueError("values must have shape (len(buses), hours)")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def horizon_hours(self) -> int:
        return self.values.shape[1]

    def at(self, bus: int, hour: int) -> float:
        return float(self.values[self.buses.index(bus), hour])

    def system(self) -> np.ndarray:
        """System-wide demand per hour."""
        return self.values.sum(axis=0)

    def slice(self, start: int, stop: int) -> DemandSeries:
        if start < 0 or stop > self.horizon_hours or start > stop:
            raise IndexError(f"hours [{start}, {stop}) outside horizon of {self.horizon_hours}")
        return DemandSeries(self.buses, self.values[:, start:stop])

    def month(self, m: int) -> DemandSeries:
        if m < 1 or m * HOURS_PER_MONTH > self.horizon_hours:
            raise IndexError(
                f"month {m} outside series of {self.horizon_hours // HOURS_PER_MONTH} months"
            )
        return self.slice((m - 1) * HOURS_PER_MONTH, m * HOURS_PER_MONTH)

    @property
    def n_months(self) -> int:
        return self.horizon_hours // HOURS_PER_MONTH

    def scaled(self, factor: float) -> DemandSeries:
        return DemandSeries(self.buses, self.values * factor)

    def for_case(self, case: NetworkCase) -> DemandSeries:
        """Reorder rows to ``case.buses``; buses absent here get zero demand."""
        if tuple(case.buses) == self.buses:
            return self
        extra = set(self.buses) - set(case.buses)
        if extra:
            raise ValueError(f"demand at buses not in case: {sorted(extra)}")
        rows = {b: k for k, b in enumerate(self.buses)}
        out = np.zeros((len(case.buses), self.horizon_hours))
        for k, b in enumerate(case.buses):
            if b in rows:
                out[k] = self.values[rows[b]]
        return DemandSeries(tuple(case.buses), out)

    @classmethod
    def from_system(cls, total: np.ndarray, case: NetworkCase) -> DemandSeries:
        """Allocate a system-level hourly series to buses by ``case.demand_share``."""
        total = np.asarray(total, dtype=float)
        return cls(tuple(case.buses), np.outer(case.share_vector(), total))


def parse_demand(text: str, case: NetworkCase | None = None) -> DemandSeries:
    """Read ``hour,bus,demand_mw`` or (with a case) ``hour,demand_mw`` tables."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DemandFormatError("empty demand file") from None
    rows = [r for r in reader if r and any(c.strip() for c in r)]

    if header == ["hour", "bus", "demand_mw"]:
        table: dict[tuple[int, int], float] = {}
        for lineno, r in enumerate(rows, start=2):
            try:
                t, b, d = int(r[0]), int(r[1]), float(r[2])
            except (ValueError, IndexError):
                raise DemandFormatError(f"line {lineno}: bad record {r!r}") from None
            if (b, t) in table:
                raise DemandFormatError(f"line {lineno}: duplicate (hour={t}, bus={b})")
            table[b, t] = d
        buses = tuple(case.buses) if case is not None else tuple(sorted({b for b, _ in table}))
        hours = 1 + max(t for _, t in table) if table else 0
        values = np.zeros((len(buses), hours))
        pos = {b: k for k, b in enumerate(buses)}
        seen = np.zeros_like(values, dtype=bool)
        for (b, t), d in table.items():
            if b not in pos:
                raise DemandFormatError(f"demand for bus {b} not in case")
            values[pos[b], t] = d
            seen[pos[b], t] = True
        demand_buses = {b for b, _ in table}
        for b in demand_buses:
            if not seen[pos[b]].all():
                raise DemandFormatError(f"bus {b}: missing hours")
        series = DemandSeries(buses, values)
    elif header == ["hour", "demand_mw"]:
        if case is None:
            raise DemandFormatError("system-total demand needs a case with demand shares")
        total = np.full(len(rows), np.nan)
        for lineno, r in enumerate(rows, start=2):
            try:
                t, d = int(r[0]), float(r[1])
            except (ValueError, IndexError):
                raise DemandFormatError(f"line {lineno}: bad record {r!r}") from None
            if not 0 <= t < len(rows) or not np.isnan(total[t]):
                raise DemandFormatError(f"line {lineno}: hour {t} out of sequence")
            total[t] = d
        series = DemandSeries.from_system(total, case)
    else:
        raise DemandFormatError(f"unrecognised header {header!r}")

    if (series.values < 0).any():
        raise DemandFormatError("negative demand")
    return series


def load_demand(path: str | Path, case: NetworkCase | None = None) -> DemandSeries:
    return parse_demand(Path(path).read_text(), case)


def emit_demand(series: DemandSeries) -> str:
    out = ["hour,bus,demand_mw"]
    for t in range(series.horizon_hours):
        for k, b in enumerate(series.buses):
            out.append(f"{t},{b},{float(series.values[k, t])!r}")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class ClimatologyProfile:
    hourly_fractions: np.ndarray  # 24
    daily_fractions: np.ndarray  # 30

    def __post_init__(self):
        h = np.asarray(self.hourly_fractions, dtype=float)
        d = np.asarray(self.daily_fractions, dtype=float)
        if h.shape != (HOURS_PER_DAY,) or d.shape != (DAYS_PER_MONTH,):
            raise ValueError("climatology needs 24 hourly and 30 daily fractions")
        if (h < 0).any() or (d < 0).any():
            raise ValueError("fractions must be nonnegative")
        for name, f in (("hourly", h), ("daily", d)):
            if abs(math.fsum(f) - 1.0) > 1e-12:
                raise ValueError(f"{name} fractions sum to {math.fsum(f)!r}")
        object.__setattr__(self, "hourly_fractions", h)
        object.__setattr__(self, "daily_fractions", d)

    @classmethod
    def from_history(cls, history: DemandSeries, months: list[int] | None = None) -> ClimatologyProfile:
        """Climatology over ``months`` of ``history`` (default: every full month)."""
        if months is None:
            months = list(range(1, history.n_months + 1))
        reference = np.concatenate([history.month(m).values for m in months], axis=1)
        return cls(
            hourly_fractions(DemandSeries(history.buses, reference)),
            daily_fractions(history, months),
        )


def _normalise(x: np.ndarray) -> np.ndarray:
    out = x / math.fsum(x)
    # one correction pass brings the float sum within an ulp or two of 1
    return out / math.fsum(out)


def perfect_forecast(observed: DemandSeries, month: int) -> DemandSeries:
    return observed.month(month)


def hourly_fractions(history: DemandSeries) -> np.ndarray:
    """Share of total system demand falling in each hour of the day."""
    if history.horizon_hours % HOURS_PER_DAY:
        raise ValueError("history length must be a whole number of days")
    per_hour = history.system().reshape(-1, HOURS_PER_DAY).sum(axis=0)
    if math.fsum(per_hour) <= 0:
        raise ValueError("history has zero total demand")
    return _normalise(per_hour)


def daily_fractions(history: DemandSeries, months: list[int]) -> np.ndarray:
    """Average over ``months`` of each day's share of its month's system demand."""
    if not months:
        raise ValueError("need at least one month")
    shares = []
    for m in months:
        days = history.month(m).system().reshape(DAYS_PER_MONTH, HOURS_PER_DAY).sum(axis=1)
        total = math.fsum(days)
        if total <= 0:
            raise ValueError(f"month {m} has zero total demand")
        shares.append(days / total)
    return _normalise(np.mean(shares, axis=0))


def pfml_forecast(observed: DemandSeries, climatology: ClimatologyProfile, month: int) -> DemandSeries:
    """Spread each bus's observed monthly total over the climatological shape."""
    totals = np.array([math.fsum(row) for row in observed.month(month).values])
    shape = np.outer(climatology.daily_fractions, climatology.hourly_fractions).ravel()
    return DemandSeries(observed.buses, np.outer(totals, shape))
