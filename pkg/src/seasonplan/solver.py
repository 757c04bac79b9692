"""Backend-agnostic LP/MILP model container and solve entry point.

Models are assembled row by row, handed to a HiGHS backend (``highspy`` or
``scipy.optimize.milp``), and every optimal answer is re-checked here
against the original rows and bounds before it is returned.
"""

from __future__ import annotations

import copy
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

LE, EQ, GE = "<=", "==", ">="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
GAP_LIMIT = "gap-limit"

DEFAULT_MIP_GAP = 1e-3
RESIDUAL_TOL = 1e-6


class SolverError(RuntimeError):
    """Backend missing, crashed, or returned an answer that fails the residual check."""


@dataclass(frozen=True)
class VariableHandle:
    index: int
    kind: str  # "continuous" | "binary"
    lower: float
    upper: float


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[int, float], ...]
    sense: str
    rhs: float


@dataclass
class SolveOptions:
    mip_gap: float = DEFAULT_MIP_GAP
    time_limit: float | None = None
    threads: int = 1
    backend: str = "highs"


@dataclass
class SolveResult:
    status: str
    objective: float
    values: np.ndarray
    mip_gap: float | None = None
    wall_seconds: float = 0.0
    max_residual: float = 0.0

    def __getitem__(self, handle: VariableHandle | int) -> float:
        i = handle.index if isinstance(handle, VariableHandle) else handle
        return float(self.values[i])

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, GAP_LIMIT) and self.values.size > 0


@dataclass
class Model:
    """Minimisation model over continuous and binary columns."""

    name: str = "model"
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    integer: list[bool] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    names: list[str] = field(default_factory=list)
    objective_offset: float = 0.0
    _rows: list[int] = field(default_factory=list)
    _cols: list[int] = field(default_factory=list)
    _vals: list[float] = field(default_factory=list)
    row_lower: list[float] = field(default_factory=list)
    row_upper: list[float] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.lower)

    @property
    def num_constraints(self) -> int:
        return len(self.row_lower)

    @property
    def num_integer(self) -> int:
        return sum(self.integer)

    def add_var(self, lower: float = 0.0, upper: float = np.inf, binary: bool = False,
                cost: float = 0.0, name: str = "") -> VariableHandle:
        if binary:
            lower, upper = max(lower, 0.0), min(upper, 1.0)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.integer.append(binary)
        self.cost.append(float(cost))
        self.names.append(name)
        return VariableHandle(len(self.lower) - 1, "binary" if binary else "continuous",
                              float(lower), float(upper))

    def set_cost(self, var: VariableHandle | int, cost: float) -> None:
        i = var.index if isinstance(var, VariableHandle) else var
        self.cost[i] = float(cost)

    def fix(self, var: VariableHandle | int, value: float) -> None:
        i = var.index if isinstance(var, VariableHandle) else var
        self.lower[i] = self.upper[i] = float(value)

    def add_constraint(self, terms, sense: str, rhs: float) -> int:
        """Add ``sum(coef * var) <sense> rhs``; ``terms`` holds (var, coef) pairs."""
        if sense not in (LE, EQ, GE):
            raise ValueError(f"unknown sense {sense!r}")
        merged: dict[int, float] = {}
        for var, coef in terms:
            i = var.index if isinstance(var, VariableHandle) else int(var)
            if not 0 <= i < self.num_vars:
                raise ValueError(f"constraint references undeclared variable {i}")
            if not np.isfinite(coef):
                raise ValueError("non-finite coefficient")
            merged[i] = merged.get(i, 0.0) + float(coef)
        if not merged:
            raise ValueError("constraint needs at least one term")
        r = self.num_constraints
        for i, c in merged.items():
            self._rows.append(r)
            self._cols.append(i)
            self._vals.append(c)
        self.row_lower.append(-np.inf if sense == LE else float(rhs))
        self.row_upper.append(np.inf if sense == GE else float(rhs))
        return r

    def constraints(self) -> list[LinearConstraint]:
        a = self.matrix().tocsr()
        out = []
        for r in range(self.num_constraints):
            lo, hi = self.row_lower[r], self.row_upper[r]
            sense, rhs = (EQ, lo) if lo == hi else ((LE, hi) if lo == -np.inf else (GE, lo))
            sl = slice(a.indptr[r], a.indptr[r + 1])
            out.append(LinearConstraint(tuple(zip(a.indices[sl].tolist(), a.data[sl].tolist())),
                                        sense, rhs))
        return out

    def matrix(self) -> sparse.csc_matrix:
        return sparse.coo_matrix(
            (self._vals, (self._rows, self._cols)), shape=(self.num_constraints, self.num_vars)
        ).tocsc()

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.dot(self.cost, x)) + self.objective_offset

    def residual(self, x: np.ndarray) -> float:
        """Largest absolute violation of any row, bound or integrality."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.num_vars:
            lo, hi = np.array(self.lower), np.array(self.upper)
            worst = max(worst, float(np.max(lo - x, initial=0.0)), float(np.max(x - hi, initial=0.0)))
            ints = np.array(self.integer)
            if ints.any():
                worst = max(worst, float(np.max(np.abs(x[ints] - np.round(x[ints])))))
        if self.num_constraints:
            ax = self.matrix() @ x
            rlo, rhi = np.array(self.row_lower), np.array(self.row_upper)
            worst = max(worst, float(np.max(rlo - ax, initial=0.0)), float(np.max(ax - rhi, initial=0.0)))
        return worst


def relax_integrality(model: Model) -> Model:
    """Copy of ``model`` with every binary column made continuous on [0, 1]."""
    relaxed = copy.deepcopy(model)
    relaxed.integer = [False] * relaxed.num_vars
    relaxed.name = model.name + "-relaxed"
    return relaxed


def build_and_solve(model: Model, options: SolveOptions | None = None) -> SolveResult:
    """Solve ``model`` (minimisation) with the configured backend."""
    options = options or SolveOptions()
    if model.num_vars == 0:
        raise ValueError("model has no variables")
    backend = _BACKENDS.get(options.backend)
    if backend is None:
        raise SolverError(f"unknown backend {options.backend!r}; choose from {sorted(_BACKENDS)}")
    start = time.perf_counter()
    result = backend(model, options)
    result.wall_seconds = time.perf_counter() - start
    if result.ok:
        x = result.values
        ints = np.array(model.integer)
        if ints.any():
            x = x.copy()
            x[ints] = np.round(x[ints])
            result.values = x
        result.max_residual = model.residual(result.values)
        if result.max_residual > RESIDUAL_TOL:
            raise SolverError(
                f"{model.name}: backend solution violates constraints by {result.max_residual:.3g}"
            )
        result.objective = model.objective_value(result.values)
    log.debug("%s: %s obj=%s in %.2fs", model.name, result.status, result.objective,
              result.wall_seconds)
    return result


def _solve_highspy(model: Model, options: SolveOptions) -> SolveResult:
    try:
        import highspy
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise SolverError("highspy is not installed") from exc

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", int(options.threads))
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("mip_rel_gap", float(options.mip_gap))
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    if options.time_limit is not None:
        h.setOptionValue("time_limit", float(options.time_limit))

    a = model.matrix()
    lp = highspy.HighsLp()
    lp.num_col_ = model.num_vars
    lp.num_row_ = model.num_constraints
    lp.col_cost_ = np.array(model.cost)
    lp.col_lower_ = np.array(model.lower)
    lp.col_upper_ = np.array(model.upper)
    lp.row_lower_ = np.array(model.row_lower)
    lp.row_upper_ = np.array(model.row_upper)
    lp.offset_ = model.objective_offset
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = a.indptr
    lp.a_matrix_.index_ = a.indices
    lp.a_matrix_.value_ = a.data
    lp.a_matrix_.num_col_ = model.num_vars
    lp.a_matrix_.num_row_ = model.num_constraints
    has_int = any(model.integer)
    if has_int:
        lp.integrality_ = [highspy.HighsVarType.kInteger if i else highspy.HighsVarType.kContinuous
                           for i in model.integer]
    h.passModel(lp)
    h.run()

    status = h.getModelStatus()
    S = highspy.HighsModelStatus
    info = h.getInfo()
    gap = float(info.mip_gap) if has_int else None
    values = np.array(h.getSolution().col_value) if info.primal_solution_status == 2 else np.array([])
    if status == S.kOptimal:
        return SolveResult(OPTIMAL, float(info.objective_function_value), values, gap)
    if status == S.kInfeasible:
        return SolveResult(INFEASIBLE, np.nan, np.array([]), gap)
    if status in (S.kUnbounded, S.kUnboundedOrInfeasible):
        if status == S.kUnboundedOrInfeasible:
            # presolve could not tell; settle it without presolve
            h.setOptionValue("presolve", "off")
            h.run()
            if h.getModelStatus() == S.kInfeasible:
                return SolveResult(INFEASIBLE, np.nan, np.array([]), gap)
        return SolveResult(UNBOUNDED, -np.inf, np.array([]), gap)
    if status in (S.kTimeLimit, S.kIterationLimit, S.kSolutionLimit, S.kInterrupt):
        if values.size:
            return SolveResult(GAP_LIMIT, float(info.objective_function_value), values, gap)
        raise SolverError(f"{model.name}: limit reached with no incumbent")
    raise SolverError(f"{model.name}: HiGHS returned {h.modelStatusToString(status)}")


def _solve_scipy(model: Model, options: SolveOptions) -> SolveResult:
    from scipy.optimize import Bounds, LinearConstraint as SciConstraint, milp

    constraints = []
    if model.num_constraints:
        constraints.append(SciConstraint(model.matrix(), model.row_lower, model.row_upper))
    opts = {"mip_rel_gap": options.mip_gap, "presolve": True}
    if options.time_limit is not None:
        opts["time_limit"] = options.time_limit
    res = milp(
        np.array(model.cost),
        integrality=np.array(model.integer, dtype=int),
        bounds=Bounds(model.lower, model.upper),
        constraints=constraints,
        options=opts,
    )
    gap = getattr(res, "mip_gap", None) if any(model.integer) else None
    if res.status == 0:
        return SolveResult(OPTIMAL, float(res.fun) + model.objective_offset, np.asarray(res.x), gap)
    if res.status == 2:
        return SolveResult(INFEASIBLE, np.nan, np.array([]), gap)
    if res.status == 3:
        return SolveResult(UNBOUNDED, -np.inf, np.array([]), gap)
    if res.status == 1 and res.x is not None:
        return SolveResult(GAP_LIMIT, float(res.fun) + model.objective_offset, np.asarray(res.x), gap)
    raise SolverError(f"{model.name}: scipy milp failed: {res.message}")


_BACKENDS = {"highs": _solve_highspy, "scipy": _solve_scipy}
