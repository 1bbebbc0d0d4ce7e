"""Residual-based majorization-minimization for the average task processing delay.

Each outer iteration linearizes the unit-norm condition on the square-root
task shares around the previous iterate, solves the resulting cone program
and maps the solution back to task shares.  The loop stops once the average
TPD moves by less than ``epsilon`` between iterations.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .convex_core import OffloadInstance, build_p4, p2_kkt_residual, solve_ipm
from .delay import DelayReport, delay_matrices
from .phy import RateTable

__all__ = ["RbmmConfig", "TraceRecord", "RbmmTrace", "RbmmResult", "initialize", "run", "run_instance", "evaluate", "kkt_residual"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RbmmConfig:
    xi: float = 0.4  # residual penalty factor
    epsilon: float = 1e-4  # [s] stop when the average TPD moves less than this
    max_iterations: int = 30
    accuracy: float = 1e-8  # cone solver KKT tolerance
    init: str = "capacity"  # capacity | local
    time_unit: float = 1e-3  # [s] delay unit of the surrogate objective

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.accuracy < 1:
            raise ValueError("accuracy must lie in (0, 1)")
        if not self.time_unit > 0:
            raise ValueError("time_unit must be positive")
        if self.init not in ("capacity", "local"):
            raise ValueError(f"unknown init mode {self.init!r}")


@dataclass
class TraceRecord:
    iteration: int
    avg_tpd: float
    max_tpd: float
    avg_lc_delay: float
    avg_offload_delay: float
    residual_sum: float
    objective: float
    status: str


@dataclass
class RbmmTrace:
    records: list[TraceRecord] = field(default_factory=list)
    initial: TraceRecord | None = None  # the starting point, not an iteration

    def __len__(self) -> int:
        return len(self.records)

    @property
    def avg_tpd(self) -> np.ndarray:
        return np.array([r.avg_tpd for r in self.records])

    @property
    def objective(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def rows(self):
        """Initial point (iteration 0) followed by every iteration."""
        head = [self.initial] if self.initial is not None else []
        return [asdict(r) for r in head + self.records]

    def dump_csv(self, path: str | Path) -> None:
        cols = list(TraceRecord.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.rows():
                w.writerow([f"{row[c]:.9f}" if isinstance(row[c], float) else row[c] for c in cols])


@dataclass
class RbmmResult:
    M: np.ndarray | None
    F: np.ndarray | None
    trace: RbmmTrace
    status: str  # converged | max_iterations | infeasible
    report: DelayReport | None = None
    raw: dict | None = None  # physical solution of the last surrogate
    violated: str = ""
    message: str = ""

    def __iter__(self):
        return iter((self.M, self.F, self.trace))

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"


def evaluate(inst: OffloadInstance, M, F) -> DelayReport:
    """Delay report of a decision on an instance (delay module arithmetic)."""
    T, Z = delay_matrices(M, F, inst.rate, inst.rho, inst.kappa, inst.tv_compute, inst.sv_compute)
    total = T + Z
    V = inst.V
    offload = total[:V].max(axis=0) if V else np.zeros(inst.U)
    return DelayReport(T, Z, total.max(axis=0), total.argmax(axis=0), Z[V].copy(), offload)


def _as_instance(scenario, rates) -> OffloadInstance:
    if isinstance(scenario, OffloadInstance):
        return scenario
    return OffloadInstance.from_scenario(scenario, rates)


def initialize(scenario, rates: RateTable | None = None, mode: str = "capacity"):
    """Deterministic feasible starting point ``(M0, F0)``.

    Every SV with a usable link offers ``1/U`` of its compute to each TV; each
    task is split in proportion to the service rate of its branches.
    """
    inst = _as_instance(scenario, rates)
    U, V = inst.U, inst.V
    kept = inst.kept
    F = np.zeros((V, U))
    F[kept.any(axis=1)] = 1.0 / U
    M = np.zeros((V + 1, U))
    if mode == "local" or V == 0:
        M[V] = 1.0
        return M, F
    weight = np.zeros((V + 1, U))
    weight[V] = inst.tv_compute / (inst.rho * inst.kappa)
    rate = np.where(kept, inst.rate, 1.0)
    branch = inst.rho / rate + inst.rho * inst.kappa / (np.where(kept, F, 1.0) * inst.sv_compute[:, None])
    weight[:V] = np.where(kept, 1.0 / branch, 0.0)
    M = weight / weight.sum(axis=0)
    return M, F


def _record(k: int, report: DelayReport, residual: float, objective: float, status: str) -> TraceRecord:
    return TraceRecord(k, report.avg_tpd, report.max_tpd, report.avg_lc_delay, report.avg_offload_delay,
                       float(residual), float(objective), status)


def _project(inst: OffloadInstance, vals: dict):
    """Task shares with unit column sums and compute shares inside the box."""
    M_raw = vals["delta"] ** 2
    M = M_raw / M_raw.sum(axis=0)
    F = np.clip(vals["F"], 0.0, 1.0)
    F = np.where(inst.kept, F, 0.0)
    load = F.sum(axis=1, keepdims=True)
    F = np.where(load > 1.0, F / np.maximum(load, 1e-300), F)
    return M, F


def run_instance(inst: OffloadInstance, config: RbmmConfig = RbmmConfig(), initial=None) -> RbmmResult:
    trace = RbmmTrace()
    M, F = initialize(inst, mode=config.init) if initial is None else (np.asarray(initial[0], float), np.asarray(initial[1], float))
    report = evaluate(inst, M, F)
    trace.initial = _record(0, report, 0.0, np.nan, "initial")
    prev = report.avg_tpd
    raw = None
    status = "max_iterations"
    for beta in range(1, config.max_iterations + 1):
        prog = build_p4(inst, np.sqrt(np.clip(M, 0.0, 1.0)), config.xi, config.time_unit)
        sol = solve_ipm(prog, accuracy=config.accuracy)
        if sol.status in ("infeasible", "unbounded"):
            if beta == 1:
                return RbmmResult(None, None, trace, "infeasible", violated=sol.violated,
                                  message=f"surrogate infeasible at the first iteration ({sol.violated})")
            # The previous iterate is feasible for every later surrogate, so
            # this only happens through numerical failure; keep the last point.
            log.warning("surrogate reported %s at iteration %d; keeping previous iterate", sol.status, beta)
            status = "solver_failure"
            break
        raw = sol.values
        M, F = _project(inst, raw)
        report = evaluate(inst, M, F)
        residual = float(raw["j1"].sum() + raw["j2"].sum())
        trace.records.append(_record(beta, report, residual, sol.objective, sol.status))
        if abs(prev - report.avg_tpd) < config.epsilon:
            status = "converged"
            break
        prev = report.avg_tpd
    return RbmmResult(M, F, trace, status, report, raw)


def run(scenario, rates: RateTable, config: RbmmConfig = RbmmConfig(), initial=None) -> RbmmResult:
    """Optimize task shares ``M`` and compute shares ``F`` for one slot."""
    return run_instance(_as_instance(scenario, rates), config, initial)


def kkt_residual(scenario, rates: RateTable | None, result: RbmmResult) -> dict:
    """First-order optimality residual of the unrelaxed problem at a result."""
    return p2_kkt_residual(_as_instance(scenario, rates), result.raw)
