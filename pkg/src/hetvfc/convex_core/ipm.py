"""Primal-dual interior-point solver for linear/second-order cone programs.

Solves

    minimize c'x  s.t.  G x + s = h,  A x = b,  s in K

with ``K`` a product of a nonnegative orthant and second-order cones, through
the homogeneous self-dual embedding.  Search directions use Nesterov-Todd
scaling and a Mehrotra predictor-corrector; the reduced Newton system is
factored with a sparse LU and polished by iterative refinement.  Infeasible
and unbounded programs are recognised from the embedding's certificates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .program import ConicProgram, StandardForm

__all__ = ["Cones", "IpmResult", "SolveResult", "solve_standard", "solve_ipm"]

log = logging.getLogger(__name__)

STEP_FRACTION = 0.99
REDUCED_TOL = 1e-6  # accepted as almost optimal when the solver cannot reach tol


class Cones:
    """Index bookkeeping and Jordan-algebra helpers for ``R+^l x Q^q1 x ...``."""

    def __init__(self, l: int, q):
        self.l = int(l)
        self.q = np.asarray(q, dtype=np.int64)
        self.nq = self.q.size
        self.m = self.l + int(self.q.sum())
        self.degree = self.l + self.nq
        starts = np.concatenate([[0], np.cumsum(self.q)[:-1]]).astype(np.int64) if self.nq else np.zeros(0, np.int64)
        self.heads = self.l + starts  # absolute head positions
        self.rel_heads = starts  # head positions within the SOC part
        self.cone_of = np.repeat(np.arange(self.nq), self.q)
        self.head_mask = np.zeros(self.m - self.l, dtype=bool)
        self.head_mask[starts] = True
        self.J = np.ones(self.m - self.l)
        self.J[~self.head_mask] = -1.0
        # (row, col) pairs of the dense per-cone blocks, for the scaling matrix.
        rows, cols = [], []
        for st, n in zip(starts, self.q):
            r = np.arange(st, st + n)
            rows.append(np.repeat(r, n))
            cols.append(np.tile(r, n))
        self.pair_rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        self.pair_cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        self.pair_cone = self.cone_of[self.pair_rows] if rows else np.zeros(0, np.int64)

    # vectors are full length m; the SOC part is v[l:]
    def _sum(self, v):
        return np.add.reduceat(v, self.rel_heads) if self.nq else np.zeros(0)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[: self.l] = 1.0
        e[self.heads] = 1.0
        return e

    def inner(self, u, v) -> np.ndarray:
        """Per-cone inner products of the SOC blocks."""
        return self._sum(u[self.l :] * v[self.l :])

    def jnorm2(self, v) -> np.ndarray:
        """``v0^2 - ||v1||^2`` per SOC block."""
        w = v[self.l :]
        return self._sum(self.J * w * w)

    def min_eig(self, v) -> float:
        vals = [v[: self.l]]
        if self.nq:
            w = v[self.l :]
            tail = np.sqrt(np.maximum(self._sum(w * w) - w[self.rel_heads] ** 2, 0.0))
            vals.append(w[self.rel_heads] - tail)
        allv = np.concatenate(vals)
        return float(allv.min()) if allv.size else np.inf

    def jprod(self, u, v) -> np.ndarray:
        out = np.empty(self.m)
        out[: self.l] = u[: self.l] * v[: self.l]
        if self.nq:
            us, vs = u[self.l :], v[self.l :]
            u0 = us[self.rel_heads][self.cone_of]
            v0 = vs[self.rel_heads][self.cone_of]
            body = u0 * vs + v0 * us
            body[self.rel_heads] = self._sum(us * vs)
            out[self.l :] = body
        return out

    def jdiv(self, lam, r) -> np.ndarray:
        """``x`` with ``lam o x = r``."""
        out = np.empty(self.m)
        out[: self.l] = r[: self.l] / lam[: self.l]
        if self.nq:
            ls, rs = lam[self.l :], r[self.l :]
            l0 = ls[self.rel_heads]
            d = self.jnorm2(lam)
            # lam1'r1 = lam'r - lam0 r0
            l1r1 = self._sum(ls * rs) - l0 * rs[self.rel_heads]
            x0 = (l0 * rs[self.rel_heads] - l1r1) / d
            body = (rs - x0[self.cone_of] * ls) / l0[self.cone_of]
            body[self.rel_heads] = x0
            out[self.l :] = body
        return out

    def max_step(self, x, dx) -> float:
        """Largest ``a`` with ``x + a*dx`` in the cone (``x`` interior)."""
        alpha = np.inf
        lp = dx[: self.l] < 0
        if lp.any():
            alpha = min(alpha, float(np.min(-x[: self.l][lp] / dx[: self.l][lp])))
        if self.nq:
            a = self.jnorm2(dx)
            c = self.jnorm2(x)
            b = self._sum(self.J * x[self.l :] * dx[self.l :])
            d0 = dx[self.l :][self.rel_heads]
            dtail = np.sqrt(np.maximum(self._sum(dx[self.l :] ** 2) - d0**2, 0.0))
            inside = d0 >= dtail
            disc = np.sqrt(np.maximum(b * b - a * c, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                root = np.where((a < 0) & (b >= 0), (b + disc) / -a, c / (disc - b))
            root = np.where(inside, np.inf, root)
            root = np.where(np.isfinite(root) & (root < 0), 0.0, root)
            if root.size:
                alpha = min(alpha, float(root.min()))
        return alpha


def _interior(cones: Cones, v) -> bool:
    if (v[: cones.l] <= 0).any():
        return False
    if cones.nq:
        heads = v[cones.heads]
        return bool((heads > 0).all() and (cones.jnorm2(v) > 0).all())
    return True


@dataclass
class _Scaling:
    lp_w: np.ndarray
    beta: np.ndarray
    v: np.ndarray  # SOC part, v'Jv = 1 per cone


def _nt_scaling(cones: Cones, s, z) -> _Scaling:
    l = cones.l
    lp_w = np.sqrt(s[:l] / z[:l])
    if not cones.nq:
        return _Scaling(lp_w, np.zeros(0), np.zeros(0))
    ss, zs = s[l:], z[l:]
    sn = np.sqrt(cones.jnorm2(s))
    zn = np.sqrt(cones.jnorm2(z))
    sb = ss / sn[cones.cone_of]
    zb = zs / zn[cones.cone_of]
    gamma = np.sqrt((1 + cones._sum(sb * zb)) / 2)
    wbar = (sb + cones.J * zb) / (2 * gamma[cones.cone_of])
    # W = beta (2 v v' - J) with v = (wbar + e) / sqrt(2 (wbar_0 + 1))
    w0 = wbar[cones.rel_heads]
    v = wbar.copy()
    v[cones.rel_heads] += 1.0
    v /= np.sqrt(2 * (w0 + 1))[cones.cone_of]
    beta = np.sqrt(sn / zn)
    return _Scaling(lp_w, beta, v)


def _apply_w(cones: Cones, W: _Scaling, v, inverse=False) -> np.ndarray:
    l = cones.l
    out = np.empty_like(v)
    out[:l] = v[:l] / W.lp_w if inverse else v[:l] * W.lp_w
    if cones.nq:
        vs = v[l:]
        if inverse:
            jw = cones.J * W.v
            out[l:] = (2 * jw * cones._sum(jw * vs)[cones.cone_of] - cones.J * vs) / W.beta[cones.cone_of]
        else:
            out[l:] = W.beta[cones.cone_of] * (2 * W.v * cones._sum(W.v * vs)[cones.cone_of] - cones.J * vs)
    return out


def _winv_matrix(cones: Cones, W: _Scaling) -> sp.csr_matrix:
    l = cones.l
    rows = [np.arange(l)]
    cols = [np.arange(l)]
    vals = [1.0 / W.lp_w]
    if cones.nq:
        jw = cones.J * W.v
        pr, pc, pk = cones.pair_rows, cones.pair_cols, cones.pair_cone
        v = 2 * jw[pr] * jw[pc] / W.beta[pk]
        v = v - np.where(pr == pc, cones.J[pr] / W.beta[pk], 0.0)
        rows.append(pr + l)
        cols.append(pc + l)
        vals.append(v)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(cones.m, cones.m))


class _KKT:
    """Factorisation of ``[[0, A', G'], [A, 0, 0], [G, 0, -W'W]]``."""

    def __init__(self, G, A, cones: Cones, W: _Scaling | None):
        self.G, self.A, self.cones, self.W = G, A, cones, W
        n, p = G.shape[1], A.shape[0]
        if W is None:
            WG = G
        else:
            WG = _winv_matrix(cones, W) @ G
        H = (WG.T @ WG).tocsc()
        diag = H.diagonal()
        reg = 1e-13 * max(1.0, float(diag.max(initial=0.0)))
        blocks = [[H + reg * sp.identity(n, format="csc"), A.T], [A, -reg * sp.identity(p, format="csc")]]
        K = sp.bmat(blocks, format="csc") if p else H + reg * sp.identity(n, format="csc")
        self.n, self.p = n, p
        self.lu = spla.splu(K.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0) if n + p else None

    def _w2inv(self, v):
        if self.W is None:
            return v
        return _apply_w(self.cones, self.W, _apply_w(self.cones, self.W, v, inverse=True), inverse=True)

    def _w2(self, v):
        if self.W is None:
            return v
        return _apply_w(self.cones, self.W, _apply_w(self.cones, self.W, v))

    def _solve_once(self, rx, ry, rz):
        rhs = np.concatenate([rx + self.G.T @ self._w2inv(rz), ry])
        sol = self.lu.solve(rhs) if self.lu is not None else rhs
        dx, dy = sol[: self.n], sol[self.n :]
        dz = self._w2inv(self.G @ dx - rz)
        return dx, dy, dz

    def solve(self, rx, ry, rz, refine: int = 2):
        dx, dy, dz = self._solve_once(rx, ry, rz)
        for _ in range(refine):
            ex = rx - (self.A.T @ dy + self.G.T @ dz)
            ey = ry - self.A @ dx
            ez = rz - (self.G @ dx - self._w2(dz))
            cx, cy, cz = self._solve_once(ex, ey, ez)
            dx, dy, dz = dx + cx, dy + cy, dz + cz
        return dx, dy, dz


@dataclass
class IpmResult:
    status: str  # optimal | almost_optimal | infeasible | unbounded | stalled | max_iterations
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    z: np.ndarray
    iterations: int
    primal_objective: float
    dual_objective: float
    residuals: dict = field(default_factory=dict)


def _norm(v) -> float:
    return float(np.linalg.norm(v)) if np.size(v) else 0.0


def solve_standard(
    c, G, h, A, b, l: int, q, tol: float = 1e-8, max_iterations: int = 100
) -> IpmResult:
    """Solve a cone program in standard form (see module docstring)."""
    cones = Cones(l, q)
    G = sp.csr_matrix(G)
    A = sp.csr_matrix(A) if A is not None else sp.csr_matrix((0, G.shape[1]))
    c, h = np.asarray(c, float), np.asarray(h, float)
    b = np.asarray(b, float) if b is not None else np.zeros(0)
    n, m, p = G.shape[1], cones.m, A.shape[0]
    e = cones.identity()
    resx0 = max(1.0, _norm(c))
    resy0 = max(1.0, _norm(b))
    resz0 = max(1.0, _norm(h))

    # Starting point from two least-squares problems with W = I.
    kkt = _KKT(G, A, cones, None)
    x, y, z0 = kkt.solve(np.zeros(n), b, h)
    s = -z0
    _, y, z = kkt.solve(-c, np.zeros(p), np.zeros(m))
    for v in (s, z):
        shift = -cones.min_eig(v)
        if shift >= -1e-8 * max(_norm(v), 1.0):
            v += (1.0 + shift) * e
    tau, kappa = 1.0, 1.0

    best = None
    status = "max_iterations"
    it = 0
    for it in range(max_iterations + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = A @ x - b * tau
        rz = G @ x + s - h * tau
        cx, by_hz = float(c @ x), float(b @ y + h @ z)
        rt = kappa + cx + by_hz
        gap = float(s @ z)
        mu = (gap + tau * kappa) / (cones.degree + 1)
        pcost, dcost = cx / tau, -by_hz / tau
        pres = max(_norm(ry) / resy0, _norm(rz) / resz0) / tau
        dres = _norm(rx) / resx0 / tau
        gap_n = gap / tau**2
        comp = gap_n / max(1.0, min(abs(pcost), abs(dcost)))
        score = max(pres, dres, comp)
        if best is None or score < best[0]:
            best = (score, x / tau, y / tau, s / tau, z / tau, pres, dres, comp, gap_n)
        if pres <= tol and dres <= tol and comp <= tol:
            status = "optimal"
            break
        if by_hz < 0:
            pinf = _norm(A.T @ y + G.T @ z) / resx0 / -by_hz
            if pinf <= tol:
                status = "infeasible"
                cert = (y / -by_hz, z / -by_hz)
                break
        if cx < 0:
            dinf = max(_norm(A @ x) / resy0, _norm(G @ x + s) / resz0) / -cx
            if dinf <= tol:
                status = "unbounded"
                break
        if it == max_iterations:
            break
        status = "stalled"  # until the step below succeeds

        W = _nt_scaling(cones, s, z)
        lam = _apply_w(cones, W, z)
        try:
            kkt = _KKT(G, A, cones, W)
        except RuntimeError as exc:  # singular factorisation
            log.debug("KKT factorisation failed: %s", exc)
            break
        x1, y1, z1 = kkt.solve(-c, b, h)
        denom = -kappa / tau + float(c @ x1 + b @ y1 + h @ z1)

        def newton(eta, rs, rk):
            v = cones.jdiv(lam, rs)
            x0, y0, z0_ = kkt.solve(-eta * rx, -eta * ry, -eta * rz - _apply_w(cones, W, v))
            dtau = (-eta * rt - rk / tau - float(c @ x0 + b @ y0 + h @ z0_)) / denom
            dx, dy, dz = x0 + dtau * x1, y0 + dtau * y1, z0_ + dtau * z1
            dkappa = (rk - kappa * dtau) / tau
            wdz = _apply_w(cones, W, dz)
            ds_scaled = v - wdz  # W^{-1} ds
            ds = _apply_w(cones, W, ds_scaled)
            return dx, dy, dz, ds, dtau, dkappa, ds_scaled, wdz

        def step(ds_scaled, wdz, dtau, dkappa):
            a = min(cones.max_step(lam, ds_scaled), cones.max_step(lam, wdz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        aff = newton(1.0, -cones.jprod(lam, lam), -tau * kappa)
        a_aff = min(1.0, step(aff[6], aff[7], aff[4], aff[5]))
        sigma = min(1.0, max(0.0, (1 - a_aff))) ** 3
        rs = -cones.jprod(lam, lam) - cones.jprod(aff[6], aff[7]) + sigma * mu * e
        rk = -tau * kappa - aff[4] * aff[5] + sigma * mu
        dx, dy, dz, ds, dtau, dkappa, ds_scaled, wdz = newton(1.0 - sigma, rs, rk)
        alpha = min(1.0, STEP_FRACTION * step(ds_scaled, wdz, dtau, dkappa))
        # Guard against round-off pushing nearly degenerate cones outside.
        while alpha > 1e-12 and not (_interior(cones, s + alpha * ds) and _interior(cones, z + alpha * dz)):
            alpha *= 0.5
        if not np.isfinite(alpha) or alpha < 1e-12:
            log.debug("step collapsed at iteration %d", it)
            break
        x, y, z, s = x + alpha * dx, y + alpha * dy, z + alpha * dz, s + alpha * ds
        tau, kappa = tau + alpha * dtau, kappa + alpha * dkappa
        status = "max_iterations"

    if status == "infeasible":
        y_out, z_out = cert
        return IpmResult(status, np.full(n, np.nan), y_out, np.full(m, np.nan), z_out, it,
                         np.inf, np.inf, {"primal_infeasibility": pinf})
    if status == "unbounded":
        return IpmResult(status, x / -cx, np.full(p, np.nan), s / -cx, np.full(m, np.nan), it,
                         -np.inf, -np.inf, {"dual_infeasibility": dinf})
    if status == "optimal":
        xo, yo, so, zo = x / tau, y / tau, s / tau, z / tau
        res = {"primal": pres, "stationarity": dres, "complementarity": comp, "gap": gap_n}
    else:
        score, xo, yo, so, zo, pres, dres, comp, gap_n = best
        if score <= max(REDUCED_TOL, tol):
            status = "almost_optimal"
        res = {"primal": pres, "stationarity": dres, "complementarity": comp, "gap": gap_n}
    res["dual"] = max(0.0, -cones.min_eig(zo))
    res["cone_primal"] = max(0.0, -cones.min_eig(so))
    return IpmResult(status, xo, yo, so, zo, it, float(c @ xo), float(-(b @ yo + h @ zo)), res)


@dataclass
class SolveResult:
    status: str
    values: dict  # block name -> physical values
    objective: float
    kkt: dict
    iterations: int
    x: np.ndarray  # flat program vector in solver units
    z: np.ndarray  # conic multipliers per lowered G row
    y: np.ndarray
    violated: str = ""  # constraint tag for infeasible programs
    standard: StandardForm | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def solved(self) -> bool:
        return self.status in ("optimal", "almost_optimal")


def solve_ipm(program: ConicProgram, accuracy: float = 1e-8, max_iterations: int = 100) -> SolveResult:
    """Lower ``program`` to standard form and solve it to KKT residual ``accuracy``."""
    sf = program.to_standard_form()
    res = solve_standard(sf.c, sf.G, sf.h, sf.A, sf.b, sf.l, sf.q, tol=accuracy, max_iterations=max_iterations)
    violated = ""
    if res.status == "infeasible":
        # The certificate's heaviest constraint is the most implicated one.
        weight = np.zeros(len(program.constraints))
        np.add.at(weight, sf.row_owner, np.abs(res.z))
        if sf.eq_owner.size:
            np.add.at(weight, sf.eq_owner, np.abs(res.y))
        violated = program.constraints[int(np.argmax(weight))].tag if weight.size else ""
        x = np.full(program.n, np.nan)
        values = {}
        objective = np.inf
    else:
        x = program.expand(res.x)
        values = program.unpack(x)
        objective = program.objective(x)
    return SolveResult(res.status, values, objective, res.residuals, res.iterations, x, res.z, res.y, violated, sf)
