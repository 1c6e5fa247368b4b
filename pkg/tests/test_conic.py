import numpy as np
import pytest

from polyclf.conic import ConvexProgram, vstack_affs


def test_lp_min_x_subject_to_x_ge_1():
    p = ConvexProgram()
    x = p.add_variable("x", 1)
    p.add_leq(1.0 - x)  # x >= 1
    p.minimize(np.array([[1.0]]) @ x)
    sol = p.solve()
    assert sol.optimal
    assert sol.values["x"][0] == pytest.approx(1.0, abs=1e-8)
    assert sol.objective == pytest.approx(1.0, abs=1e-8)


def test_lp_infeasible():
    p = ConvexProgram()
    x = p.add_variable("x", 1)
    p.add_leq(x - (-1.0))  # x <= -1
    p.add_leq(1.0 - x)     # x >= 1
    sol = p.solve()
    assert sol.status == "infeasible"


def test_lp_unbounded():
    p = ConvexProgram()
    x = p.add_variable("x", 1)
    p.minimize(np.array([[1.0]]) @ x)
    sol = p.solve()
    assert sol.status == "unbounded"


def test_quad_epigraph_1d_calculus_oracle():
    # min t s.t. (x-1)^2 + (x+1)^2 <= t has minimizer x = 0, t = 2
    p = ConvexProgram()
    x = p.add_variable("x", 1)
    t = p.add_variable("t", 1)
    arg = vstack_affs([x - 1.0, x + 1.0])
    p.add_quad_leq(arg, t)
    p.minimize(np.array([[1.0]]) @ t)
    sol = p.solve()
    assert sol.optimal
    assert sol.values["x"][0] == pytest.approx(0.0, abs=1e-6)
    assert sol.values["t"][0] == pytest.approx(2.0, abs=1e-6)
    assert sol.residuals["quad_rel"] <= 1e-6


def test_quad_with_equality_and_matrix_terms():
    # project the point (3, 4) onto the plane x1 + x2 = 1
    p = ConvexProgram()
    x = p.add_variable("x", 2)
    t = p.add_variable("t", 1)
    p.add_eq(np.array([[1.0, 1.0]]) @ x - 1.0)
    p.add_quad_leq(x - np.array([3.0, 4.0]), t)
    p.minimize(np.array([[1.0]]) @ t)
    sol = p.solve()
    assert sol.optimal
    assert np.allclose(sol.values["x"], [0.0, 1.0], atol=1e-6)


def test_inf_norm_epigraph_symmetric():
    # rows z-2 and z+2 with unit weights: best is z = 0 with t = 2
    p = ConvexProgram()
    z = p.add_variable("z", 1)
    rows = vstack_affs([z - 2.0, z + 2.0])
    t = p.add_inf_norm_epigraph(rows, [1.0, 1.0])
    p.minimize(np.array([[1.0]]) @ t)
    sol = p.solve()
    assert sol.optimal
    assert sol.values["z"][0] == pytest.approx(0.0, abs=1e-7)
    assert sol.objective == pytest.approx(2.0, abs=1e-7)


def test_inf_norm_single_row_and_weights():
    p = ConvexProgram()
    z = p.add_variable("z", 1)
    t = p.add_inf_norm_epigraph(3.0 * z.as_aff() - 6.0, [2.0])
    p.minimize(np.array([[0.0]]) @ z + np.array([[1.0]]) @ t)
    p.add_eq(z - 1.0)
    sol = p.solve()
    assert sol.optimal
    # |2 * (3*1 - 6)| = 6
    assert sol.objective == pytest.approx(6.0, abs=1e-7)


def test_inf_norm_zero_weight_rejected():
    p = ConvexProgram()
    z = p.add_variable("z", 2)
    with pytest.raises(ValueError):
        p.add_inf_norm_epigraph(z, [1.0, 0.0])


def test_feasibility_recheck_reported():
    p = ConvexProgram()
    x = p.add_variable("x", 3)
    A = np.array([[1.0, 2.0, -1.0], [0.0, 1.0, 1.0]])
    p.add_leq(A @ x - np.array([1.0, 2.0]))
    p.minimize(np.array([[-1.0, -1.0, -1.0]]) @ x)
    sol = p.solve()
    # unbounded here; bound it and re-solve
    p2 = ConvexProgram()
    x = p2.add_variable("x", 3)
    p2.add_leq(A @ x - np.array([1.0, 2.0]))
    p2.add_leq(x - 5.0 * np.ones(3))
    p2.add_leq(-x - 5.0 * np.ones(3))
    p2.minimize(np.array([[-1.0, -1.0, -1.0]]) @ x)
    sol = p2.solve()
    assert sol.optimal
    assert sol.residuals["affine_ineq"] <= 1e-7


def test_dump_is_deterministic():
    def build():
        p = ConvexProgram()
        x = p.add_variable("x", 2)
        y = p.add_variable("y", 1)
        p.add_leq(np.array([[1.0, -1.0]]) @ x + 2.0 * y.as_aff())
        p.add_eq(np.array([[1.0, 1.0]]) @ x - 1.0)
        p.add_quad_leq(x - np.array([0.5, 0.5]), y)
        p.minimize(np.array([[1.0]]) @ y)
        return p.dump()

    assert build() == build()
    assert build().encode() == build().encode()


def test_variable_slicing():
    p = ConvexProgram()
    z = p.add_variable("z", 4)
    p.add_eq(z[0:2] - np.array([1.0, 2.0]))
    p.add_eq(z[2:4] - np.array([3.0, 4.0]))
    p.minimize(np.array([[1.0, 1.0, 1.0, 1.0]]) @ z)
    sol = p.solve()
    assert sol.optimal
    assert np.allclose(sol.values["z"], [1, 2, 3, 4], atol=1e-8)
