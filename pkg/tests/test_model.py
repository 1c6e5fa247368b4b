import numpy as np
import pytest

from polyclf.errors import Infeasible
from polyclf.geometry import HPolyhedron
from polyclf.model import (
    LinearSystem,
    QuadraticCost,
    SetDistanceCost,
    UncertaintyModel,
    compute_rci_target,
    eval_stage_cost,
    robust_counterpart_rows,
)
from polyclf.template import build_polytope_triplet


PAPER_A = np.array([[1.0, 1.0], [0.0, 1.0]])
PAPER_B = np.array([[0.5], [1.0]])
PAPER_K = np.array([[-0.895, -1.367]])
PAPER_Q = np.diag([1.0, 0.1])
PAPER_R = np.array([[0.1]])


@pytest.fixture
def paper_system():
    return LinearSystem(PAPER_A, PAPER_B,
                        HPolyhedron.box([-1, -1], [2, 2]),
                        HPolyhedron.box([-0.5], [0.5]))


@pytest.fixture
def paper_uncertainty():
    W = HPolyhedron(np.array([[1.0, -1.0], [-1.0, 1.0], [1.0, 0.0], [-1.0, 0.0]]),
                    np.array([0.0, 0.0, 0.025, 0.025]))
    return UncertaintyModel([(PAPER_A, PAPER_B)], W)


def test_system_validation():
    X = HPolyhedron.box([-1, -1], [1, 1])
    U = HPolyhedron.box([-1], [1])
    with pytest.raises(ValueError):
        LinearSystem(PAPER_A, np.zeros((2, 1)), X, U)  # rank(B) = 0
    with pytest.raises(ValueError):
        # origin outside the state set
        LinearSystem(PAPER_A, PAPER_B, HPolyhedron.box([1, 1], [2, 2]), U)


def test_disturbance_vertices_of_flat_polytope(paper_uncertainty):
    V = paper_uncertainty.w_vertices()
    got = sorted(map(tuple, np.round(V, 9)))
    assert np.allclose(got, [(-0.025, -0.025), (0.025, 0.025)])


def test_robust_counterpart_single_vertex(paper_uncertainty):
    R_i = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    rows = robust_counterpart_rows(paper_uncertainty, np.array([1.0, 0.0]), R_i)
    assert len(rows) == 1
    coef_z, coef_v, const = rows[0]
    # w_bar for direction (1, 0) over the segment is 1/40
    assert const == pytest.approx(1.0 / 40.0, abs=1e-10)
    assert np.allclose(coef_z, (np.array([1.0, 0.0]) @ PAPER_A) @ R_i)
    assert np.allclose(coef_v, np.array([1.0, 0.0]) @ PAPER_B)


def test_robust_counterpart_zero_disturbance(paper_system):
    W0 = HPolyhedron(np.vstack([np.eye(2), -np.eye(2)]), np.zeros(4))
    unc = UncertaintyModel([(PAPER_A, PAPER_B)], W0)
    rows = robust_counterpart_rows(unc, np.array([0.3, 0.7]), np.eye(2))
    assert rows[0][2] == pytest.approx(0.0, abs=1e-12)


def test_robust_counterpart_two_vertices(paper_uncertainty):
    unc = UncertaintyModel([(PAPER_A, PAPER_B), (0.9 * PAPER_A, PAPER_B)],
                           paper_uncertainty.W)
    rows = robust_counterpart_rows(unc, np.array([1.0, 0.0]), np.eye(2))
    assert len(rows) == 2


def test_counterpart_matches_sampled_maximum(paper_uncertainty):
    rng = np.random.default_rng(0)
    unc = UncertaintyModel(
        [(PAPER_A, PAPER_B), (PAPER_A * 0.9, PAPER_B * 1.1)],
        paper_uncertainty.W)
    R_i = rng.standard_normal((2, 5))
    G_j = rng.standard_normal(2)
    rows = robust_counterpart_rows(unc, G_j, R_i)
    Wv = unc.w_vertices()
    for _ in range(20):
        z = rng.standard_normal(5)
        v = rng.standard_normal(1)
        exact = max(cz @ z + cv @ v + c for cz, cv, c in rows)
        sampled = -np.inf
        for _ in range(500):
            th = rng.uniform(0, 1)
            A_s = th * unc.AB_vertices[0][0] + (1 - th) * unc.AB_vertices[1][0]
            B_s = th * unc.AB_vertices[0][1] + (1 - th) * unc.AB_vertices[1][1]
            tw = rng.uniform(0, 1)
            w = tw * Wv[0] + (1 - tw) * Wv[1]
            sampled = max(sampled,
                          G_j @ A_s @ R_i @ z + G_j @ B_s @ v + G_j @ w)
        assert sampled <= exact + 1e-8
    # the maximum is attained at a vertex combination
    z = rng.standard_normal(5)
    v = rng.standard_normal(1)
    exact = max(cz @ z + cv @ v + c for cz, cv, c in rows)
    at_vertices = max(
        G_j @ A_l @ R_i @ z + G_j @ B_l @ v + G_j @ w
        for A_l, B_l in unc.AB_vertices for w in Wv)
    assert at_vertices == pytest.approx(exact, abs=1e-8)


def test_rci_target_paper_gain(paper_system, paper_uncertainty):
    ang = np.pi / 8 + np.arange(8) * np.pi / 4
    G1 = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    dom = build_polytope_triplet(G1, np.ones(8))
    Xs = compute_rci_target(dom, PAPER_K, paper_system, paper_uncertainty)
    # vertex-wise invariance residual
    Acl = PAPER_A + PAPER_B @ PAPER_K
    verts = dom.vertex_points(Xs.z)
    Wv = paper_uncertainty.w_vertices()
    worst = -np.inf
    for x in verts:
        for w in Wv:
            worst = max(worst, np.max(Xs.F @ (Acl @ x + w) - Xs.z))
    assert worst <= 1e-8
    assert np.all(Xs.z > 0)  # the target has nonempty interior


def test_rci_target_zero_disturbance_gives_origin(paper_system):
    W0 = HPolyhedron(np.vstack([np.eye(2), -np.eye(2)]), np.zeros(4))
    unc = UncertaintyModel([(PAPER_A, PAPER_B)], W0)
    ang = np.pi / 8 + np.arange(8) * np.pi / 4
    G1 = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    dom = build_polytope_triplet(G1, np.ones(8))
    Xs = compute_rci_target(dom, PAPER_K, paper_system, unc)
    assert np.max(np.abs(Xs.z)) <= 1e-8


def test_rci_target_unstable_gain_infeasible(paper_system, paper_uncertainty):
    ang = np.pi / 8 + np.arange(8) * np.pi / 4
    G1 = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    dom = build_polytope_triplet(G1, np.ones(8))
    with pytest.raises(Infeasible):
        compute_rci_target(dom, np.zeros((1, 2)), paper_system,
                           paper_uncertainty)


def test_quadratic_cost_values():
    cost = QuadraticCost(PAPER_Q, PAPER_R)
    assert eval_stage_cost(cost, [1.0, 0.0], [0.0]) == pytest.approx(1.0)
    assert eval_stage_cost(cost, [0.0, 0.0], [0.0]) == pytest.approx(0.0)
    assert eval_stage_cost(cost, [0.0, 1.0], [1.0]) == pytest.approx(0.2)


def test_set_distance_cost(paper_system, paper_uncertainty):
    ang = np.pi / 8 + np.arange(8) * np.pi / 4
    G1 = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    dom = build_polytope_triplet(G1, np.ones(8))
    Xs = compute_rci_target(dom, PAPER_K, paper_system, paper_uncertainty)
    cost = SetDistanceCost(PAPER_Q, PAPER_R, PAPER_K, Xs)
    # inside the target with u = Kx the cost vanishes
    x_in = 0.1 * Xs.z[0] * Xs.F[0]
    assert Xs.contains(x_in)
    assert cost.eval(x_in, PAPER_K @ x_in) == pytest.approx(0.0, abs=1e-12)
    # outside: distance part plus feedback mismatch
    x_out = np.array([1.0, 0.5])
    val = cost.eval(x_out, [0.0])
    du = -PAPER_K @ x_out
    assert val >= float(du @ PAPER_R @ du)


def test_set_distance_convexity_midpoint():
    target = HPolyhedron.box([-0.1, -0.1], [0.1, 0.1])
    cost = SetDistanceCost(PAPER_Q, PAPER_R, PAPER_K, target)
    rng = np.random.default_rng(4)
    for _ in range(25):
        xa, xb = rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2)
        ua, ub = rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)
        mid = cost.eval(0.5 * (xa + xb), 0.5 * (ua + ub))
        assert mid <= 0.5 * cost.eval(xa, ua) + 0.5 * cost.eval(xb, ub) + 1e-9
