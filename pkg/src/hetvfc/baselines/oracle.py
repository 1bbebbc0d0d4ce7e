"""Exhaustive grid search over (M, F) for desk-scale instances."""

from __future__ import annotations

import itertools
import time

import numpy as np

from ..phy import RateTable
from ..rbmm import evaluate
from .common import BaselineResult, as_instance, batch_tpd

__all__ = ["MAX_ORACLE_DIM", "simplex_grid", "equalized_shares", "grid_oracle"]

MAX_ORACLE_DIM = 6


def simplex_grid(dim: int, resolution: float) -> np.ndarray:
    """All points of the probability simplex in ``R^dim`` with coordinates on a ``resolution`` lattice."""
    steps = int(round(1.0 / resolution))
    if not np.isclose(steps * resolution, 1.0):
        raise ValueError("1/resolution must be an integer")
    if dim == 1:
        return np.ones((1, 1))
    pts = []
    for comb in itertools.combinations(range(steps + dim - 1), dim - 1):
        # stars and bars
        bars = (-1,) + comb + (steps + dim - 1,)
        pts.append([bars[i + 1] - bars[i] - 1 for i in range(dim)])
    return np.array(pts, dtype=float) / steps


def equalized_shares(inst, F: np.ndarray):
    """Best task split for fixed compute shares ``F`` (batch ``(P, V, U)``).

    With every branch delay linear in its share, the minimum of the largest
    branch delay puts shares in proportion to branch throughputs, which
    equalizes all used branches.  Returns ``(M, tpd)``.
    """
    V = inst.V
    with np.errstate(divide="ignore"):
        cost = inst.rho / np.where(inst.kept, inst.rate, np.nan) + inst.rho * inst.kappa / (F * inst.sv_compute[:, None])
    thr = np.where(inst.kept & (F > 0), 1.0 / np.nan_to_num(cost, nan=np.inf), 0.0)
    local = np.broadcast_to(1.0 / inst.local_delay, (F.shape[0], 1, inst.U))
    thr = np.concatenate([thr, local], axis=1)
    total = thr.sum(axis=1)
    return thr / total[:, None, :], 1.0 / total


def _refine(inst, F, h0: float, h_min: float = 1e-13):
    """Pattern search on ``F`` with the task split solved exactly; ``h`` halves on failure."""
    U, V = inst.U, inst.V
    y = F.ravel().copy()
    d = y.size
    offsets = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=d)))

    def value(Y):
        Fb = Y.reshape(-1, V, U)
        ok = (Fb >= 0).all(axis=(1, 2)) & (Fb <= 1).all(axis=(1, 2))
        ok &= (Fb.sum(axis=2) <= 1 + 1e-12).all(axis=1)
        _, tpd = equalized_shares(inst, np.clip(Fb, 0.0, 1.0))
        ok &= (tpd <= inst.slot_length).all(axis=1)
        return np.where(ok, tpd.mean(axis=1), np.inf)

    best = value(y[None])[0]
    h = h0
    while h >= h_min and d:
        Y = y[None] + h * offsets
        vals = value(Y)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, y = vals[k], Y[k]
        else:
            h /= 2
    F = y.reshape(V, U)
    M, _ = equalized_shares(inst, F[None])
    return M[0], F


def grid_oracle(
    scenario, rates: RateTable | None = None, resolution: float = 0.01, f_values=None, refine: bool = False
) -> BaselineResult:
    """Global minimum of the average TPD over a lattice of decisions.

    Each column of ``M`` ranges over the simplex lattice; every compute share
    ranges over ``f_values`` (default: the same lattice on ``[0, 1]``) and
    combinations exceeding an SV's capacity are dropped.  Decisions with a
    TPD above the slot length are excluded.  Given ``F`` the TVs decouple,
    so each TV's best column is found per compute-share column first.

    With ``refine`` the lattice optimum is polished: the task split is solved
    exactly for given ``F`` and ``F`` itself by a shrinking pattern search
    (compute shares stay fixed when ``f_values`` is given).
    """
    t = time.perf_counter()
    inst = as_instance(scenario, rates)
    U, V = inst.U, inst.V
    if U * (V + 1) > MAX_ORACLE_DIM:
        raise ValueError(f"grid oracle is limited to U*(V+1) <= {MAX_ORACLE_DIM}, got {U * (V + 1)}")
    fv = np.arange(0, 1 + resolution / 2, resolution) if f_values is None else np.asarray(f_values, float)
    fv = np.clip(fv, 0.0, 1.0)
    Mgrid = simplex_grid(V + 1, resolution)  # (G, V+1)
    fcols = np.array(list(itertools.product(fv, repeat=V))) if V else np.zeros((1, 0))  # (H, V)

    # best[u][h]: min over M columns of TV u's delay given compute column h
    best_val = np.full((U, len(fcols)), np.inf)
    best_idx = np.zeros((U, len(fcols)), dtype=np.int64)
    for u in range(U):
        m_off = Mgrid[:, :V]  # (G, V)
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = np.where(inst.kept[:, u], inst.rate[:, u], 0.0)
            T = np.where(m_off > 1e-9, m_off * inst.rho[u] / rate, 0.0)
            Zc = inst.rho[u] * inst.kappa[u] / (fcols[None, :, :] * inst.sv_compute[None, None, :])  # (1, H, V)
            Z = np.where(m_off[:, None, :] > 1e-9, m_off[:, None, :] * Zc, 0.0)  # (G, H, V)
        branch = np.nan_to_num(T[:, None, :] + Z, nan=np.inf)
        local = Mgrid[:, V] * inst.local_delay[u]
        tpd = np.maximum(branch.max(axis=2, initial=0.0), local[:, None])  # (G, H)
        tpd = np.where(tpd <= inst.slot_length, tpd, np.inf)
        best_idx[u] = np.argmin(tpd, axis=0)
        best_val[u] = tpd[best_idx[u], np.arange(len(fcols))]

    H = len(fcols)
    top = (np.inf, None)
    for combo in itertools.product(range(H), repeat=U):
        F = fcols[list(combo)].T  # (V, U)
        if V and (F.sum(axis=1) > 1 + 1e-12).any():
            continue
        val = best_val[np.arange(U), combo].mean()
        if val < top[0]:
            top = (val, combo)
    if top[1] is None:
        return BaselineResult("oracle", None, None, None, time.perf_counter() - t, "infeasible")
    combo = top[1]
    F = fcols[list(combo)].T.reshape(V, U)
    M = np.stack([Mgrid[best_idx[u, h]] for u, h in enumerate(combo)], axis=1)
    if refine:
        if f_values is not None:
            M = equalized_shares(inst, F[None])[0][0]
        else:
            M, F = _refine(inst, F, resolution)
    report = evaluate(inst, M, F)
    return BaselineResult("oracle", M, F, report, time.perf_counter() - t, "ok", extra={"grid_value": top[0]})
