"""Delay accounting for one slot: transmission, computing and task processing delay.

Decision matrices follow the ``(V+1, U)`` layout: rows ``0..V-1`` are the real
SVs and row ``V`` is local computing at the TV itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .phy import RateTable
from .scenario import SlotScenario

__all__ = [
    "ZERO_SHARE",
    "InfeasibleDecision",
    "OffloadDecision",
    "DelayReport",
    "computing_delay",
    "transmission_delay",
    "delay_matrices",
    "average_tpd",
]

# Task shares below this are treated as exactly zero.
ZERO_SHARE = 1e-9


class InfeasibleDecision(ValueError):
    """A positive task share has no compute or no link to carry it."""


@dataclass
class OffloadDecision:
    M: np.ndarray  # (V+1, U) task proportions
    F: np.ndarray  # (V, U) compute shares

    def check(self, tol: float = 1e-9) -> None:
        M, F = self.M, self.F
        if M.shape[0] != F.shape[0] + 1 or M.shape[1] != F.shape[1]:
            raise ValueError(f"inconsistent shapes M{M.shape} F{F.shape}")
        if (M < -tol).any() or (M > 1 + tol).any() or (F < -tol).any() or (F > 1 + tol).any():
            raise InfeasibleDecision("entries must lie in [0, 1]")
        if np.abs(M.sum(axis=0) - 1).max(initial=0) > tol:
            raise InfeasibleDecision("task shares of a TV must sum to one")
        if (F.sum(axis=1) > 1 + tol).any():
            raise InfeasibleDecision("an SV cannot hand out more than its compute")


@dataclass
class DelayReport:
    T: np.ndarray  # (V+1, U) transmission delay, row V is zero
    Z: np.ndarray  # (V+1, U) computing delay
    tpd: np.ndarray  # (U,)
    branch: np.ndarray  # (U,) argmax row of T+Z
    local_delay: np.ndarray  # (U,)
    offload_delay: np.ndarray  # (U,) slowest offloading branch, 0 if none

    @property
    def avg_tpd(self) -> float:
        return float(self.tpd.mean())

    @property
    def max_tpd(self) -> float:
        return float(self.tpd.max())

    @property
    def avg_lc_delay(self) -> float:
        return float(self.local_delay.mean())

    @property
    def avg_offload_delay(self) -> float:
        return float(self.offload_delay.mean())

    def rows(self, tvs=None):
        """``(tv, branch, T, Z, tpd)`` for every branch; branch ``"local"`` for LC."""
        V = self.T.shape[0] - 1
        tvs = range(self.T.shape[1]) if tvs is None else tvs
        for j, u in enumerate(tvs):
            for i in range(V + 1):
                yield (u, "local" if i == V else i, self.T[i, j], self.Z[i, j], self.tpd[j])

    def dump_csv(self, path: str | Path, tvs=None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tv", "branch", "T", "Z", "tpd"])
            for u, b, t, z, tpd in self.rows(tvs):
                w.writerow([u, b, f"{t:.9f}", f"{z:.9f}", f"{tpd:.9f}"])


def computing_delay(m, rho, kappa, f, C):
    """``m * rho * kappa / (f * C)``, zero where the share is zero."""
    m, f = np.asarray(m, dtype=float), np.asarray(f, dtype=float)
    active = m > ZERO_SHARE
    if (active & (f <= 0)).any():
        raise InfeasibleDecision("positive task share with zero compute allocation")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(active, m * rho * kappa / (np.where(active, f, 1.0) * C), 0.0)
    return z if z.ndim else float(z)


def transmission_delay(m, rho, R, S):
    """``m * rho / (R + S)``, zero where the share is zero."""
    m = np.asarray(m, dtype=float)
    rate = np.asarray(R, dtype=float) + np.asarray(S, dtype=float)
    active = m > ZERO_SHARE
    if (active & (rate <= 0)).any():
        raise InfeasibleDecision("positive task share over a link with zero rate")
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(active, m * rho / np.where(active, rate, 1.0), 0.0)
    return t if t.ndim else float(t)


def delay_matrices(M, F, rate, rho, kappa, tv_compute, sv_compute):
    """``(T, Z)`` with shapes ``(V+1, U)``; no backhaul delay is charged."""
    M = np.asarray(M, dtype=float)
    V = M.shape[0] - 1
    T = np.zeros_like(M)
    Z = np.zeros_like(M)
    if V:
        T[:V] = transmission_delay(M[:V], rho[None, :], rate, 0.0)
        Z[:V] = computing_delay(M[:V], rho[None, :], kappa[None, :], F, sv_compute[:, None])
    Z[V] = computing_delay(M[V], rho, kappa, 1.0, tv_compute)
    return T, Z


def average_tpd(decision: OffloadDecision, rates: RateTable, scenario: SlotScenario) -> DelayReport:
    """Per-TV task processing delay and the slot average."""
    M, F = decision.M, decision.F
    T, Z = delay_matrices(
        M, F, rates.total, scenario.rho, scenario.kappa, scenario.tv_compute, scenario.sv_compute
    )
    total = T + Z
    V = M.shape[0] - 1
    offload = total[:V].max(axis=0) if V else np.zeros(M.shape[1])
    return DelayReport(T, Z, total.max(axis=0), total.argmax(axis=0), Z[V].copy(), offload)
