"""The convex surrogate solved at every outer iteration, and checks around it.

Variables are the square roots ``delta`` of the task shares, the compute
shares ``F``, the per-TV delay bound ``zeta`` and the per-branch transmit and
compute delay bounds ``omega1``/``omega2``, plus the residuals ``j1``/``j2``
that relax the unit-norm condition on each column of ``delta``.

Delay variables are carried in units of ``t0`` (the slot length or the
slowest local computing delay, whichever is smaller) so that every cone row
is of order one.  The bilinear compute bound ``a delta^2 <= omega2 f`` is
written as the balanced rotated cone ``||(omega2 - f, 2 sqrt(a) delta)|| <=
omega2 + f``; transmission and local bounds use the same construction with a
constant second factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .program import Affine, ConicProgram

__all__ = [
    "StructuralInfeasibility",
    "OffloadInstance",
    "build_p4",
    "socp_equivalence_check",
    "p2_kkt_residual",
]

MIN_RATE = 1.0  # [bit/s] pairs slower than this are pruned


class StructuralInfeasibility(ValueError):
    """A TV can neither offload nor finish locally within the slot."""


@dataclass
class OffloadInstance:
    """Numbers the optimizer needs from a slot: task, compute and link data."""

    rho: np.ndarray  # (U,) task size [bit]
    kappa: np.ndarray  # (U,) [cycles/bit]
    tv_compute: np.ndarray  # (U,) [cycles/s]
    sv_compute: np.ndarray  # (V,) [cycles/s]
    rate: np.ndarray  # (V, U) R + S [bit/s]
    slot_length: float  # Lambda [s]

    def __post_init__(self):
        self.rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        self.kappa = np.broadcast_to(np.asarray(self.kappa, dtype=float), self.rho.shape).copy()
        self.tv_compute = np.broadcast_to(np.asarray(self.tv_compute, dtype=float), self.rho.shape).copy()
        self.sv_compute = np.atleast_1d(np.asarray(self.sv_compute, dtype=float))
        self.rate = np.asarray(self.rate, dtype=float).reshape(self.sv_compute.size, self.rho.size)

    @classmethod
    def from_scenario(cls, scenario, rates) -> "OffloadInstance":
        return cls(scenario.rho, scenario.kappa, scenario.tv_compute, scenario.sv_compute,
                   rates.total, scenario.slot_length)

    @property
    def U(self) -> int:
        return self.rho.size

    @property
    def V(self) -> int:
        return self.sv_compute.size

    @property
    def local_delay(self) -> np.ndarray:
        return self.rho * self.kappa / self.tv_compute

    @property
    def kept(self) -> np.ndarray:
        """(V, U) pairs with a usable link."""
        return self.rate >= MIN_RATE

    @property
    def time_unit(self) -> float:
        return float(min(self.slot_length, self.local_delay.max()))

    def check_structure(self) -> None:
        stuck = ~self.kept.any(axis=0) & (self.local_delay > self.slot_length)
        if stuck.any():
            u = int(np.flatnonzero(stuck)[0])
            raise StructuralInfeasibility(
                f"TV {u} has no usable link and needs {self.local_delay[u]:.6g} s locally "
                f"(slot {self.slot_length:.6g} s)"
            )


def build_p4(inst: OffloadInstance, delta_prev: np.ndarray, xi: float = 0.4, objective_unit: float = 1.0) -> ConicProgram:
    """Convex surrogate around ``delta_prev`` (shape ``(V+1, U)``, entries in [0, 1]).

    The objective counts delay in multiples of ``objective_unit`` seconds, so
    ``xi`` is the price of one unit of residual in that time unit.
    """
    inst.check_structure()
    U, V = inst.U, inst.V
    delta_prev = np.asarray(delta_prev, dtype=float)
    if delta_prev.shape != (V + 1, U):
        raise ValueError(f"iterate has shape {delta_prev.shape}, expected {(V + 1, U)}")
    if (delta_prev < -1e-12).any() or (delta_prev > 1 + 1e-12).any():
        raise ValueError("iterate must lie in [0, 1]")
    delta_prev = np.clip(delta_prev, 0.0, 1.0)
    t0 = inst.time_unit
    kept = inst.kept

    prog = ConicProgram()
    D = prog.add_block("delta", (V + 1, U))
    F = prog.add_block("F", (V, U))
    Zt = prog.add_block("zeta", (U,), scale=t0)
    W1 = prog.add_block("omega1", (V, U), scale=t0)
    W2 = prog.add_block("omega2", (V, U), scale=t0)
    J1 = prog.add_block("j1", (U,))
    J2 = prog.add_block("j2", (U,))
    prog.add_objective(Zt, t0 / (U * objective_unit))
    prog.add_objective(J1, xi / U)
    prog.add_objective(J2, xi / U)

    for v, u in zip(*np.nonzero(~kept)):
        prog.fix([D[v, u], F[v, u], W1[v, u], W2[v, u]], 0.0)
    for v in np.flatnonzero(~kept.any(axis=1)):
        prog.fix(F[v], 0.0)
    for u in np.flatnonzero(~kept.any(axis=0)):
        prog.fix(D[V, u], 1.0)

    var = prog.var
    one = Affine.constant(1.0)
    lam = inst.slot_length / t0
    for v in range(V):
        cols = np.flatnonzero(kept[v])
        for u in cols:
            prog.add_linear(var(F[v, u], -1.0), f"f_nonneg[{v},{u}]")
            prog.add_linear(var(F[v, u]) - 1.0, f"f_upper[{v},{u}]")
        if cols.size:
            prog.add_linear(Affine.of(F[v, cols], 1.0, -1.0), f"capacity[{v}]")
    if np.isfinite(lam):  # an infinite slot length drops the deadline
        for u in range(U):
            prog.add_linear(var(Zt[u]) - lam, f"slot_limit[{u}]")
    for v, u in zip(*np.nonzero(kept)):
        prog.add_linear(var(W1[v, u]) + var(W2[v, u]) - var(Zt[u]), f"delay_split[{v},{u}]")
        a = inst.rho[u] * inst.kappa[u] / (inst.sv_compute[v] * t0)
        prog.add_soc(
            [var(W2[v, u]) - var(F[v, u]), var(D[v, u], 2 * np.sqrt(a))],
            var(W2[v, u]) + var(F[v, u]),
            f"compute_soc[{v},{u}]",
        )
    for v in range(V + 1):
        for u in range(U):
            if v < V and not kept[v, u]:
                continue
            prog.add_linear(var(D[v, u], -1.0), f"delta_lower[{v},{u}]")
            prog.add_linear(var(D[v, u]) - 1.0, f"delta_upper[{v},{u}]")
    for v, u in zip(*np.nonzero(kept)):
        b = inst.rho[u] / (inst.rate[v, u] * t0)
        prog.add_soc(
            [var(W1[v, u]) - 1.0, var(D[v, u], 2 * np.sqrt(b))],
            var(W1[v, u]) + 1.0,
            f"transmit_soc[{v},{u}]",
        )
    for u in range(U):
        ell = inst.local_delay[u] / t0
        prog.add_soc(
            [var(Zt[u]) - 1.0, var(D[V, u], 2 * np.sqrt(ell))],
            var(Zt[u]) + 1.0,
            f"local_soc[{u}]",
        )
    for u in range(U):
        rows = [v for v in range(V) if kept[v, u]] + [V]
        prog.add_quadratic([var(D[v, u]) for v in rows], one + var(J1[u]), f"norm_upper[{u}]")
        d0 = delta_prev[rows, u]
        # sum(2 d0 d - d0^2) - 1 >= j2
        lin = Affine.of(D[rows, u], -2 * d0, float(d0 @ d0) + 1.0) + var(J2[u])
        prog.add_linear(lin, f"norm_lower[{u}]")
    for u in range(U):
        prog.add_linear(var(J1[u], -1.0), f"j1_nonneg[{u}]")
        prog.add_linear(var(J2[u], -1.0), f"j2_nonneg[{u}]")
    return prog


def socp_equivalence_check(delta, f, omega2, rho, kappa, C) -> tuple[bool, bool]:
    """(cone form holds, bilinear compute-delay bound holds) for one point."""
    cone = float(np.hypot(C * f - omega2, np.sqrt(4 * rho * kappa) * delta)) <= C * f + omega2
    bilinear = delta**2 * rho * kappa <= omega2 * f * C
    return bool(cone), bool(bilinear)


def p2_kkt_residual(inst: OffloadInstance, values: dict, active_tol: float = 1e-5) -> dict:
    """First-order optimality residual of the unrelaxed problem at a point.

    ``values`` holds physical ``delta, F, zeta, omega1, omega2``.  The problem
    is posed in the same scaled units as the surrogate, with every column of
    ``delta`` on the unit sphere.  Multipliers of the (nearly) active
    inequalities are fitted by nonnegative least squares; the sphere
    multipliers are free.
    """
    U, V = inst.U, inst.V
    t0 = inst.time_unit
    kept = inst.kept
    d = np.asarray(values["delta"], float)
    f = np.asarray(values["F"], float)
    z = np.asarray(values["zeta"], float) / t0
    w1 = np.asarray(values["omega1"], float) / t0
    w2 = np.asarray(values["omega2"], float) / t0

    # variable layout: delta (kept + local), f (kept), zeta, w1 (kept), w2 (kept)
    pairs = list(zip(*np.nonzero(kept)))
    npair = len(pairs)
    pid = {p: k for k, p in enumerate(pairs)}
    i_d = {p: k for k, p in enumerate(pairs)}
    i_dl = {u: npair + u for u in range(U)}
    base_f = npair + U
    base_z = base_f + npair
    base_w1 = base_z + U
    base_w2 = base_w1 + npair
    n = base_w2 + npair

    grad_obj = np.zeros(n)
    grad_obj[base_z : base_z + U] = 1.0 / U
    ineq, eq, values_g, values_h = [], [], [], []

    def g(val, entries):
        row = np.zeros(n)
        for i, c in entries:
            row[i] += c
        values_g.append(val)
        ineq.append(row)

    for (v, u), k in pid.items():
        g(-f[v, u], [(base_f + k, -1.0)])
        g(f[v, u] - 1, [(base_f + k, 1.0)])
        g(-d[v, u], [(i_d[(v, u)], -1.0)])
        g(d[v, u] - 1, [(i_d[(v, u)], 1.0)])
        g(w1[v, u] + w2[v, u] - z[u], [(base_w1 + k, 1.0), (base_w2 + k, 1.0), (base_z + u, -1.0)])
        a = inst.rho[u] * inst.kappa[u] / (inst.sv_compute[v] * t0)
        g(a * d[v, u] ** 2 - w2[v, u] * f[v, u],
          [(i_d[(v, u)], 2 * a * d[v, u]), (base_w2 + k, -f[v, u]), (base_f + k, -w2[v, u])])
        b = inst.rho[u] / (inst.rate[v, u] * t0)
        g(b * d[v, u] ** 2 - w1[v, u], [(i_d[(v, u)], 2 * b * d[v, u]), (base_w1 + k, -1.0)])
    for v in range(V):
        ks = [pid[(v, u)] for u in range(U) if kept[v, u]]
        if ks:
            g(sum(f[v, u] for u in range(U) if kept[v, u]) - 1, [(base_f + k, 1.0) for k in ks])
    for u in range(U):
        lam = inst.slot_length / t0
        if np.isfinite(lam):
            g(z[u] - lam, [(base_z + u, 1.0)])
        g(-d[V, u], [(i_dl[u], -1.0)])
        g(d[V, u] - 1, [(i_dl[u], 1.0)])
        ell = inst.local_delay[u] / t0
        g(ell * d[V, u] ** 2 - z[u], [(i_dl[u], 2 * ell * d[V, u]), (base_z + u, -1.0)])
        row = np.zeros(n)
        total = d[V, u] ** 2
        row[i_dl[u]] = 2 * d[V, u]
        for v in range(V):
            if kept[v, u]:
                row[i_d[(v, u)]] = 2 * d[v, u]
                total += d[v, u] ** 2
        eq.append(row)
        values_h.append(total - 1)

    gv = np.array(values_g)
    G = np.array(ineq)
    H = np.array(eq)
    primal = max(float(np.maximum(gv, 0).max(initial=0)), float(np.abs(values_h).max(initial=0)))
    active = gv >= -active_tol
    basis = np.vstack([G[active], H, -H]).T  # columns: active gradients, +/- equality gradients
    mult, stat = nnls(basis, -grad_obj, maxiter=50 * basis.shape[1] + 100)
    lam_active = mult[: active.sum()]
    comp = float(np.abs(lam_active * gv[active]).max(initial=0))
    scale = max(1.0, float(np.linalg.norm(grad_obj)))
    return {
        "stationarity": float(stat) / scale,
        "primal": primal,
        "complementarity": comp,
        "max": max(float(stat) / scale, primal, comp),
    }
