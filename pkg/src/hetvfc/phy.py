"""OFDMA subchannel assignment and achievable rates of the VLC and RF subsystems."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import ChannelState
from .scenario import SlotScenario

__all__ = [
    "PhyParams",
    "Assignment",
    "RateTable",
    "assign_subchannels",
    "rf_subchannel_rate",
    "vlc_subchannel_rate",
    "rf_rate_table",
    "vlc_rate_table",
    "aggregate_rates",
    "dbm_per_hz_to_w",
]

IM_DD_FACTOR = math.e / (2 * math.pi)


def dbm_per_hz_to_w(dbm: float) -> float:
    return 10 ** ((dbm - 30) / 10)


@dataclass(frozen=True)
class PhyParams:
    n_vlc: int = 8  # K
    n_rf: int = 8  # L
    gamma_v: float = 0.5e6  # [Hz]
    gamma_r: float = 0.5e6  # [Hz]
    mu_v: float = 1e-21  # [A^2/Hz]
    mu_r: float = dbm_per_hz_to_w(-174.0)  # [W/Hz]
    power_vlc: float = 0.1  # per subchannel [W]
    power_rf: float = 0.1  # per subchannel [W]
    unassigned_interference: bool = True


@dataclass
class Assignment:
    a: np.ndarray  # (V, U, K) bool
    b: np.ndarray  # (V, U, L) bool
    p1: np.ndarray  # (U, K)
    p2: np.ndarray  # (U, K)
    q: np.ndarray  # (U, L)
    gamma_v: float
    gamma_r: float
    mu_v: float
    mu_r: float

    def __post_init__(self):
        if (self.a.sum(axis=0) > 1).any() or (self.b.sum(axis=0) > 1).any():
            raise ValueError("a subchannel of a TV can serve at most one SV")
        if (self.p1 < 0).any() or (self.p2 < 0).any() or (self.q < 0).any():
            raise ValueError("transmit powers must be non-negative")

    @property
    def K(self) -> int:
        return self.p1.shape[1]

    @property
    def L(self) -> int:
        return self.q.shape[1]

    @property
    def p(self) -> np.ndarray:
        return np.stack([self.p1, self.p2])


@dataclass
class RateTable:
    """Aggregate link rates ``[sv, tv]`` in bits/s; local computing has no row."""

    R: np.ndarray  # VLC
    S: np.ndarray  # RF

    @property
    def total(self) -> np.ndarray:
        return self.R + self.S

    def only(self, medium: str) -> "RateTable":
        if medium == "vlc":
            return RateTable(self.R.copy(), np.zeros_like(self.S))
        if medium == "rf":
            return RateTable(np.zeros_like(self.R), self.S.copy())
        raise ValueError(f"unknown medium {medium!r}")

    @classmethod
    def from_total(cls, total) -> "RateTable":
        total = np.atleast_2d(np.asarray(total, dtype=float))
        return cls(np.zeros_like(total), total.copy())

    def dump_csv(self, path: str | Path, tvs, svs) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tv", "sv", "R_vlc_bps", "S_rf_bps"])
            for j, u in enumerate(tvs):
                for i, v in enumerate(svs):
                    w.writerow([u, v, f"{self.R[i, j]:.6f}", f"{self.S[i, j]:.6f}"])


def assign_subchannels(cs: ChannelState, scenario: SlotScenario | None = None, params: PhyParams = PhyParams()) -> Assignment:
    """Strongest-gain assignment with equal per-subchannel power.

    Every VLC subchannel of a TV goes to the SV with the largest nonzero
    VLC gain (forward or backward); every RF subchannel to the SV with the
    largest faded gain on that subchannel.  Ties pick the lowest SV index.
    """
    V, U = cs.h1.shape
    K, L = params.n_vlc, params.n_rf
    a = np.zeros((V, U, K), dtype=bool)
    b = np.zeros((V, U, L), dtype=bool)
    if V:
        vlc = np.maximum(cs.h1, cs.h2)
        best = np.argmax(vlc, axis=0)
        for u in range(U):
            if vlc[best[u], u] > 0:
                a[best[u], u, :] = True
        g2 = cs.g2[:, :, :L]
        best_rf = np.argmax(g2, axis=0)  # (U, L)
        for u in range(U):
            for l in range(L):
                if g2[best_rf[u, l], u, l] > 0:
                    b[best_rf[u, l], u, l] = True
    p1 = np.full((U, K), params.power_vlc)
    q = np.full((U, L), params.power_rf)
    if not params.unassigned_interference:
        p1 = np.where(a.any(axis=0), p1, 0.0)
        q = np.where(b.any(axis=0), q, 0.0)
    return Assignment(a, b, p1, p1.copy(), q, params.gamma_v, params.gamma_r, params.mu_v, params.mu_r)


def rf_subchannel_rate(u: int, v: int, l: int, asg: Assignment, cs: ChannelState) -> float:
    """Rate of RF subchannel ``l`` from TV ``u`` to SV ``v`` (array indices)."""
    signal = cs.g2[v, u, l] * asg.q[u, l]
    interference = sum(cs.g2[v, i, l] * asg.q[i, l] for i in range(asg.q.shape[0]) if i != u)
    return asg.gamma_r * math.log2(1 + signal / (interference + asg.mu_r * asg.gamma_r))


def vlc_subchannel_rate(u: int, v: int, k: int, iota: int, asg: Assignment, cs: ChannelState) -> float:
    """Rate of VLC subchannel ``k`` on the forward (``iota=1``) or backward (2) link."""
    if iota not in (1, 2):
        raise ValueError("iota must be 1 (forward) or 2 (backward)")
    h = cs.h1 if iota == 1 else cs.h2
    p = asg.p1 if iota == 1 else asg.p2
    signal = h[v, u] ** 2 * p[u, k]
    interference = sum(h[v, i] ** 2 * p[i, k] for i in range(p.shape[0]) if i != u)
    return asg.gamma_v / 2 * math.log2(1 + IM_DD_FACTOR * signal / (interference + asg.mu_v * asg.gamma_v))


def rf_rate_table(asg: Assignment, cs: ChannelState) -> np.ndarray:
    """All RF subchannel rates, shape ``(V, U, L)``."""
    rx = cs.g2[:, :, : asg.L] * asg.q[None, :, :]
    interference = np.maximum(rx.sum(axis=1, keepdims=True) - rx, 0.0)
    return asg.gamma_r * np.log2(1 + rx / (interference + asg.mu_r * asg.gamma_r))


def vlc_rate_table(asg: Assignment, cs: ChannelState) -> np.ndarray:
    """All VLC subchannel rates, shape ``(2, V, U, K)`` (forward, backward)."""
    rx = cs.h[:, :, :, None] ** 2 * asg.p[:, None, :, :]
    interference = np.maximum(rx.sum(axis=2, keepdims=True) - rx, 0.0)
    return asg.gamma_v / 2 * np.log2(1 + IM_DD_FACTOR * rx / (interference + asg.mu_v * asg.gamma_v))


def aggregate_rates(asg: Assignment, cs: ChannelState) -> RateTable:
    S = (asg.b * rf_rate_table(asg, cs)).sum(axis=2)
    R = (asg.a * vlc_rate_table(asg, cs).sum(axis=0)).sum(axis=2)
    return RateTable(R, S)
