"""A small conic program container with named variable blocks.

Constraints are kept in the user's vocabulary (linear, convex quadratic,
second-order cone) and lowered to the standard form

    minimize c'x  s.t.  G x + s = h,  A x = b,  s in R+^l x Q^{q1} x ... x Q^{qk}

only when the program is handed to the solver.  Variables may be fixed to a
value; fixed variables are substituted out during lowering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = ["Affine", "Block", "Constraint", "ConicProgram", "StandardForm"]


@dataclass
class Affine:
    """``coef . x[idx] + const`` over the program's flat variable vector."""

    idx: np.ndarray
    coef: np.ndarray
    const: float = 0.0

    @classmethod
    def of(cls, idx=(), coef=(), const=0.0) -> "Affine":
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape).copy()
        return cls(idx, coef, float(const))

    @classmethod
    def constant(cls, value: float) -> "Affine":
        return cls.of(const=value)

    def __add__(self, other: "Affine | float") -> "Affine":
        if not isinstance(other, Affine):
            return Affine(self.idx, self.coef, self.const + float(other))
        return Affine(
            np.concatenate([self.idx, other.idx]),
            np.concatenate([self.coef, other.coef]),
            self.const + other.const,
        )

    def __sub__(self, other: "Affine | float") -> "Affine":
        return self + (other * -1.0 if isinstance(other, Affine) else -float(other))

    def __mul__(self, k: float) -> "Affine":
        return Affine(self.idx, self.coef * k, self.const * k)

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> float:
        return float(self.coef @ x[self.idx] + self.const) if self.idx.size else self.const


@dataclass
class Block:
    name: str
    shape: tuple[int, ...]
    offset: int
    scale: float = 1.0  # physical value = scale * solver value

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=int))

    def indices(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.size).reshape(self.shape)


@dataclass
class Constraint:
    """One constraint; ``kind`` is ``linear``, ``equality``, ``quadratic`` or ``soc``.

    * linear:    ``lhs <= 0``
    * equality:  ``lhs == 0``
    * quadratic: ``sum(a^2 for a in terms) <= rhs``
    * soc:       ``|| terms ||_2 <= rhs``
    """

    kind: str
    tag: str
    lhs: Affine | None = None
    terms: list[Affine] = field(default_factory=list)
    rhs: Affine | None = None

    def violation(self, x: np.ndarray) -> float:
        if self.kind == "linear":
            return max(0.0, self.lhs.value(x))
        if self.kind == "equality":
            return abs(self.lhs.value(x))
        vals = np.array([t.value(x) for t in self.terms])
        rhs = self.rhs.value(x)
        if self.kind == "quadratic":
            return max(0.0, float(vals @ vals) - rhs)
        return max(0.0, float(np.linalg.norm(vals)) - rhs)


@dataclass
class StandardForm:
    c: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    l: int
    q: list[int]
    free: np.ndarray  # program index of each solver variable
    row_owner: np.ndarray  # constraint index of each G row
    eq_owner: np.ndarray  # constraint index of each A row
    objective_offset: float


class ConicProgram:
    """Linear objective with linear, convex quadratic and SOC constraints."""

    def __init__(self):
        self.blocks: dict[str, Block] = {}
        self.n = 0
        self.c = np.zeros(0)
        self.c0 = 0.0
        self.constraints: list[Constraint] = []
        self.fixed: dict[int, float] = {}

    # -- variables -----------------------------------------------------
    def add_block(self, name: str, shape, scale: float = 1.0) -> np.ndarray:
        if name in self.blocks:
            raise ValueError(f"duplicate block {name!r}")
        shape = tuple(np.atleast_1d(shape).tolist()) if not isinstance(shape, tuple) else shape
        blk = Block(name, shape, self.n, scale)
        self.blocks[name] = blk
        self.n += blk.size
        self.c = np.concatenate([self.c, np.zeros(blk.size)])
        return blk.indices()

    def idx(self, name: str) -> np.ndarray:
        return self.blocks[name].indices()

    def fix(self, indices, value: float) -> None:
        for i in np.atleast_1d(indices).ravel():
            self.fixed[int(i)] = float(value)

    def var(self, i: int, coef: float = 1.0) -> Affine:
        return Affine.of([i], [coef])

    # -- objective and constraints ------------------------------------
    def add_objective(self, indices, coef) -> None:
        np.add.at(self.c, np.atleast_1d(indices).ravel(), np.broadcast_to(coef, np.shape(np.atleast_1d(indices).ravel())))

    def _add(self, con: Constraint) -> Constraint:
        for part in [con.lhs, con.rhs, *con.terms]:
            if part is not None and part.idx.size and (part.idx.min() < 0 or part.idx.max() >= self.n):
                raise ValueError(f"constraint {con.tag!r} references an undeclared variable")
        self.constraints.append(con)
        return con

    def add_linear(self, lhs: Affine, tag: str) -> Constraint:
        """``lhs <= 0``."""
        return self._add(Constraint("linear", tag, lhs=lhs))

    def add_equality(self, lhs: Affine, tag: str) -> Constraint:
        return self._add(Constraint("equality", tag, lhs=lhs))

    def add_quadratic(self, terms: list[Affine], rhs: Affine, tag: str) -> Constraint:
        """``sum(t^2) <= rhs``."""
        return self._add(Constraint("quadratic", tag, terms=list(terms), rhs=rhs))

    def add_soc(self, terms: list[Affine], rhs: Affine, tag: str) -> Constraint:
        """``||terms||_2 <= rhs``."""
        return self._add(Constraint("soc", tag, terms=list(terms), rhs=rhs))

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for con in self.constraints:
            out[con.kind] = out.get(con.kind, 0) + 1
        return out

    # -- evaluation ----------------------------------------------------
    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.c0)

    def max_violation(self, x: np.ndarray) -> tuple[float, str]:
        worst, tag = 0.0, ""
        for con in self.constraints:
            v = con.violation(x)
            if v > worst:
                worst, tag = v, con.tag
        return worst, tag

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        """Physical block values from a flat solver-unit vector."""
        return {name: blk.scale * x[blk.offset : blk.offset + blk.size].reshape(blk.shape) for name, blk in self.blocks.items()}

    # -- lowering ------------------------------------------------------
    def to_standard_form(self) -> StandardForm:
        fixed_mask = np.zeros(self.n, dtype=bool)
        fixed_val = np.zeros(self.n)
        for i, v in self.fixed.items():
            fixed_mask[i] = True
            fixed_val[i] = v
        free = np.flatnonzero(~fixed_mask)
        col = -np.ones(self.n, dtype=np.int64)
        col[free] = np.arange(free.size)

        def split(aff: Affine):
            """Free-column coefficients and constant with fixed values folded in."""
            if not aff.idx.size:
                return np.zeros(0, np.int64), np.zeros(0), aff.const
            f = fixed_mask[aff.idx]
            const = aff.const + float(aff.coef[f] @ fixed_val[aff.idx[f]])
            return col[aff.idx[~f]], aff.coef[~f], const

        lin_rows, soc_rows, eq_rows = [], [], []
        for k, con in enumerate(self.constraints):
            if con.kind == "linear":
                lin_rows.append((k, [(-1.0, con.lhs, True)]))  # s = -lhs >= 0
            elif con.kind == "equality":
                eq_rows.append((k, con.lhs))
            elif con.kind == "soc":
                soc_rows.append((k, [(1.0, con.rhs, True)] + [(1.0, t, True) for t in con.terms]))
            else:
                # sum t^2 <= r  <=>  ||(2t, r - 1)|| <= r + 1
                rows = [(1.0, con.rhs + 1.0, True)] + [(2.0, t, True) for t in con.terms] + [(1.0, con.rhs - 1.0, True)]
                soc_rows.append((k, rows))

        Gi, Gj, Gv, h, owner = [], [], [], [], []
        r = 0

        def emit(k, sign, aff):
            nonlocal r
            cols, coef, const = split(aff)
            # s = sign * aff  =>  G x + s = h  with  G = -sign*coef, h = sign*const
            Gi.extend([r] * cols.size)
            Gj.extend(cols.tolist())
            Gv.extend((-sign * coef).tolist())
            h.append(sign * const)
            owner.append(k)
            r += 1

        for k, rows in lin_rows:
            for sign, aff, _ in rows:
                emit(k, sign, aff)
        l = r
        q = []
        for k, rows in soc_rows:
            for sign, aff, _ in rows:
                emit(k, sign, aff)
            q.append(len(rows))
        nf = free.size
        G = sp.csr_matrix((Gv, (Gi, Gj)), shape=(r, nf))
        Ai, Aj, Av, b, eq_owner = [], [], [], [], []
        for e, (k, aff) in enumerate(eq_rows):
            cols, coef, const = split(aff)
            Ai.extend([e] * cols.size)
            Aj.extend(cols.tolist())
            Av.extend(coef.tolist())
            b.append(-const)
            eq_owner.append(k)
        A = sp.csr_matrix((Av, (Ai, Aj)), shape=(len(eq_rows), nf))
        offset = self.c0 + float(self.c[fixed_mask] @ fixed_val[fixed_mask])
        return StandardForm(
            self.c[free].copy(), G, np.array(h, dtype=float), A, np.array(b, dtype=float),
            l, q, free, np.array(owner, dtype=np.int64), np.array(eq_owner, dtype=np.int64), offset,
        )

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        """Flat program vector (solver units) from the free-variable solution."""
        x = np.zeros(self.n)
        for i, v in self.fixed.items():
            x[i] = v
        x[~np.isin(np.arange(self.n), list(self.fixed))] = x_free
        return x

    def dump(self) -> str:
        """Plain-text listing of blocks and constraint rows for cross-checking."""
        names = np.empty(self.n, dtype=object)
        for blk in self.blocks.values():
            for flat, multi in zip(blk.indices().ravel(), np.ndindex(*blk.shape)):
                names[flat] = f"{blk.name}[{','.join(map(str, multi))}]"

        def fmt(aff: Affine) -> str:
            parts = [f"{c:+.12g}*{names[i]}" for i, c in zip(aff.idx, aff.coef)]
            return " ".join(parts + [f"{aff.const:+.12g}"])

        lines = ["# blocks"]
        lines += [f"block {b.name} shape={b.shape} scale={b.scale:.12g}" for b in self.blocks.values()]
        lines.append("# objective")
        lines.append("min " + " ".join(f"{c:+.12g}*{names[i]}" for i, c in enumerate(self.c) if c) + f" {self.c0:+.12g}")
        lines.append("# fixed")
        lines += [f"fix {names[i]} = {v:.12g}" for i, v in sorted(self.fixed.items())]
        lines.append("# constraints")
        for con in self.constraints:
            if con.kind in ("linear", "equality"):
                op = "<=" if con.kind == "linear" else "=="
                lines.append(f"{con.kind} {con.tag}: {fmt(con.lhs)} {op} 0")
            else:
                body = " ; ".join(fmt(t) for t in con.terms)
                op = "sumsq" if con.kind == "quadratic" else "norm"
                lines.append(f"{con.kind} {con.tag}: {op}[{body}] <= {fmt(con.rhs)}")
        return "\n".join(lines) + "\n"
