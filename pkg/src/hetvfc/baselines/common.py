"""Shared pieces of the reference methods: result type and the box encoding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..convex_core import OffloadInstance
from ..delay import DelayReport

__all__ = ["BaselineResult", "BoxEncoding", "as_instance", "batch_tpd"]


def as_instance(scenario, rates=None) -> OffloadInstance:
    if isinstance(scenario, OffloadInstance):
        return scenario
    return OffloadInstance.from_scenario(scenario, rates)


@dataclass
class BaselineResult:
    method: str
    M: np.ndarray | None
    F: np.ndarray | None
    report: DelayReport | None  # recomputed from (M, F), never self-reported
    wall_time: float
    status: str = "ok"  # ok | infeasible | converged | max_iterations
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def avg_tpd(self) -> float:
        return self.report.avg_tpd if self.report is not None else float("nan")

    @property
    def feasible(self) -> bool:
        return self.report is not None and self.status != "infeasible"


class BoxEncoding:
    """Maps a point of ``[0, 1]^n`` to a decision ``(M, F)``.

    The first block holds one score per reachable branch of every TV (kept
    SV pairs plus local computing) and is turned into task shares by a
    column softmax; the second block is the compute share of every kept pair.
    Unreachable pairs never carry a share.
    """

    def __init__(self, inst: OffloadInstance, temperature: float = 0.1):
        self.inst = inst
        self.temperature = temperature
        V, U = inst.V, inst.U
        self.reach = np.vstack([inst.kept, np.ones((1, U), dtype=bool)])  # (V+1, U)
        self.m_pos = np.flatnonzero(self.reach.ravel())
        self.f_pos = np.flatnonzero(inst.kept.ravel())
        self.n_m = self.m_pos.size
        self.n = self.n_m + self.f_pos.size

    def encode(self, M: np.ndarray, F: np.ndarray) -> np.ndarray:
        """A box point decoding to (approximately) ``(M, F)``.

        Under the softmax, shares below ``exp(-1/temperature)`` of a column's
        largest share are not representable and round to that floor.
        """
        M = np.asarray(M, float).ravel()[self.m_pos]
        if self.temperature:
            x_m = np.empty(self.n_m)
            cols = self.m_pos % self.inst.U
            for u in np.unique(cols):
                sel = cols == u
                with np.errstate(divide="ignore"):
                    logs = np.log(M[sel] / M[sel].max())
                x_m[sel] = np.clip(1.0 + self.temperature * logs, 0.0, 1.0)
        else:
            x_m = M.copy()
        x_f = np.asarray(F, float).ravel()[self.f_pos]
        return np.concatenate([x_m, np.clip(x_f, 0.0, 1.0)])

    def decode(self, X: np.ndarray, repair: bool = False):
        """Batch decode ``X`` of shape ``(P, n)`` to ``M (P, V+1, U)`` and ``F (P, V, U)``."""
        X = np.atleast_2d(X)
        P = X.shape[0]
        V, U = self.inst.V, self.inst.U
        if self.temperature:
            score = np.full((P, (V + 1) * U), -np.inf)
            score[:, self.m_pos] = X[:, : self.n_m] / self.temperature
            score = score.reshape(P, V + 1, U)
            score -= score.max(axis=1, keepdims=True)
            e = np.exp(score)
        else:
            e = np.zeros((P, (V + 1) * U))
            e[:, self.m_pos] = np.clip(X[:, : self.n_m], 0.0, 1.0)
            e = e.reshape(P, V + 1, U)
            e[:, V] = np.maximum(e[:, V], 1e-12)  # an all-zero column falls back to local
        M = e / e.sum(axis=1, keepdims=True)
        F = np.zeros((P, V * U))
        F[:, self.f_pos] = np.clip(X[:, self.n_m :], 0.0, 1.0)
        F = F.reshape(P, V, U)
        if repair:
            load = F.sum(axis=2, keepdims=True)
            F = np.where(load > 1.0, F / np.maximum(load, 1e-300), F)
            # No task share may go where no compute is granted.
            M[:, :V] = np.where(F > 0, M[:, :V], 0.0)
            M /= M.sum(axis=1, keepdims=True)
        return M, F

    def tpd(self, M: np.ndarray, F: np.ndarray) -> np.ndarray:
        return batch_tpd(self.inst, M, F)

    def fitness(self, X: np.ndarray) -> np.ndarray:
        """Average TPD of the repaired decision plus ``10 Lambda`` per unit of violation.

        Violations are the raw compute over-subscription (before repair) and
        the relative excess of every TPD over the slot length.
        """
        _, F_raw = self.decode(X)
        capacity = np.maximum(F_raw.sum(axis=2) - 1.0, 0.0).sum(axis=1)
        M, F = self.decode(X, repair=True)
        tpd = self.tpd(M, F)
        lam = self.inst.slot_length
        weight = 10 * (lam if np.isfinite(lam) else self.inst.time_unit)
        with np.errstate(over="ignore", invalid="ignore"):
            late = np.maximum(tpd / lam - 1.0, 0.0).sum(axis=1)
            return tpd.mean(axis=1) + weight * (capacity + late)


def batch_tpd(inst: OffloadInstance, M: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Per-TV delay ``(P, U)`` of a batch of decisions, by the delay formulas."""
    V = inst.V
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(inst.kept, inst.rate, np.inf)
        T = M[:, :V] * inst.rho / rate
        Z = M[:, :V] * (inst.rho * inst.kappa) / (F * inst.sv_compute[:, None])
        Z = np.where(M[:, :V] > 1e-9, Z, 0.0)
        T = np.where(M[:, :V] > 1e-9, T, 0.0)
    local = M[:, V] * inst.local_delay
    branch = np.concatenate([T + Z, local[:, None, :]], axis=1)
    return np.nan_to_num(branch.max(axis=1), nan=np.inf)
