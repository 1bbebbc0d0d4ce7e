import cvxpy as cp
import numpy as np
import pytest

from hetvfc.convex_core import Affine, ConicProgram, solve_ipm, solve_standard
from hetvfc.convex_core.ipm import Cones


def interior_point(cones, rng):
    v = rng.normal(size=cones.m)
    v[: cones.l] = np.abs(v[: cones.l]) + 0.1
    for head, q in zip(cones.heads, cones.q):
        v[head] = np.linalg.norm(v[head + 1 : head + q]) + 0.5
    return v


def random_socp(rng, n=8, m_l=6, qs=(4, 5, 3), with_eq=True):
    """Strictly feasible, box-bounded SOCP in standard form."""
    cones = Cones(m_l, list(qs))
    G = rng.normal(size=(cones.m, n))
    x0 = rng.normal(size=n)
    h = G @ x0 + interior_point(cones, rng)
    Gb = np.vstack([G[:m_l], np.eye(n), -np.eye(n), G[m_l:]])
    hb = np.concatenate([h[:m_l], 10 + x0, 10 - x0, h[m_l:]])
    A = rng.normal(size=(2, n)) if with_eq else None
    b = A @ x0 if with_eq else None
    return rng.normal(size=n), Gb, hb, A, b, m_l + 2 * n, list(qs)


def cvxpy_value(c, G, h, A, b, l, qs):
    x = cp.Variable(len(c))
    cons = [G[:l] @ x <= h[:l]]
    off = l
    for q in qs:
        cons.append(cp.SOC(h[off] - G[off] @ x, h[off + 1 : off + q] - G[off + 1 : off + q] @ x))
        off += q
    if A is not None:
        cons.append(A @ x == b)
    prob = cp.Problem(cp.Minimize(c @ x), cons)
    prob.solve(solver="CLARABEL")
    return prob.value


def test_scalar_lp():
    res = solve_standard([1.0], np.array([[-1.0]]), np.array([-1.0]), None, None, 1, [])
    assert res.status == "optimal"
    assert res.x[0] == pytest.approx(1.0, abs=1e-7)


def test_distance_to_point_via_cone():
    # min t  s.t.  ||(x - 1, y - sqrt3)|| <= t,  x = y = 0  ->  t* = 2
    prog = ConicProgram()
    x, y, t = prog.add_block("x", ()), prog.add_block("y", ()), prog.add_block("t", ())
    prog.add_objective(t, 1.0)
    prog.add_soc([prog.var(int(x)) - 1.0, prog.var(int(y)) - np.sqrt(3)], prog.var(int(t)), "dist")
    prog.add_equality(prog.var(int(x)), "x_zero")
    prog.add_equality(prog.var(int(y)), "y_zero")
    res = solve_ipm(prog)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(2.0, abs=1e-7)


@pytest.mark.parametrize("trial", range(10))
def test_random_socp_matches_reference_solver(trial):
    rng = np.random.default_rng(100 + trial)
    data = random_socp(rng, with_eq=bool(trial % 2))
    res = solve_standard(*data)
    assert res.status == "optimal"
    ref = cvxpy_value(*data)
    assert res.primal_objective == pytest.approx(ref, rel=1e-6, abs=1e-6)


def test_infeasible_lp_detected():
    # x >= 1 and x <= 0
    res = solve_standard([1.0], np.array([[-1.0], [1.0]]), np.array([-1.0, 0.0]), None, None, 2, [])
    assert res.status == "infeasible"


def test_unbounded_lp_detected():
    res = solve_standard([1.0], np.array([[1.0]]), np.array([1.0]), None, None, 1, [])
    assert res.status == "unbounded"


def test_infeasible_program_names_constraint():
    prog = ConicProgram()
    x = int(prog.add_block("x", ()))
    prog.add_objective(x, 1.0)
    prog.add_linear(Affine.of([x], [-1.0], 1.0), "at_least_one")  # 1 - x <= 0
    prog.add_linear(Affine.of([x], [1.0], 0.0), "at_most_zero")
    res = solve_ipm(prog)
    assert res.status == "infeasible"
    assert res.violated in ("at_least_one", "at_most_zero")
    assert not res.solved


def test_fixed_variables_fold_into_constants():
    prog = ConicProgram()
    x = prog.add_block("x", (2,))
    prog.add_objective(x, [1.0, 1.0])
    prog.fix([x[1]], 3.0)
    prog.add_linear(Affine.of([x[0]], [-1.0], 2.0), "lower")  # x0 >= 2
    sf = prog.to_standard_form()
    assert sf.c.size == 1 and sf.objective_offset == pytest.approx(3.0)
    res = solve_ipm(prog)
    assert res.objective == pytest.approx(5.0, abs=1e-7)
    assert res.values["x"][1] == 3.0


def test_quadratic_row_lowering():
    # x^2 + y^2 <= 1, maximize x + y  ->  sqrt 2
    prog = ConicProgram()
    x = prog.add_block("x", (2,))
    prog.add_objective(x, [-1.0, -1.0])
    prog.add_quadratic([prog.var(int(x[0])), prog.var(int(x[1]))], Affine.constant(1.0), "disc")
    res = solve_ipm(prog)
    assert res.objective == pytest.approx(-np.sqrt(2), abs=1e-7)
    assert prog.max_violation(res.x)[0] <= 1e-8


def test_block_scale_applies_on_unpack():
    prog = ConicProgram()
    t = prog.add_block("t", (), scale=0.01)
    prog.add_objective(t, 1.0)
    prog.add_linear(Affine.of([int(t)], [-1.0], 4.0), "lower")
    res = solve_ipm(prog)
    assert float(res.values["t"]) == pytest.approx(0.04, abs=1e-9)


def test_dump_lists_every_constraint():
    prog = ConicProgram()
    x = prog.add_block("x", (2,))
    prog.add_objective(x, [1.0, 2.0])
    prog.add_linear(Affine.of(x, [1.0, 1.0], -1.0), "sum")
    prog.add_soc([prog.var(int(x[0]))], prog.var(int(x[1])), "cone")
    text = prog.dump()
    assert "linear sum:" in text and "cone" in text and "x[1]" in text
    assert prog.counts() == {"linear": 1, "soc": 1}


def test_solver_is_deterministic():
    data = random_socp(np.random.default_rng(7))
    a, b = solve_standard(*data), solve_standard(*data)
    assert np.array_equal(a.x, b.x) and a.iterations == b.iterations


def test_complementarity_at_optimum():
    rng = np.random.default_rng(11)
    c, G, h, A, b, l, qs = random_socp(rng)
    res = solve_standard(c, G, h, A, b, l, qs)
    cones = Cones(l, qs)
    assert abs(float(res.s @ res.z)) <= 1e-6
    assert cones.min_eig(res.s) >= -1e-9 and cones.min_eig(res.z) >= -1e-9
