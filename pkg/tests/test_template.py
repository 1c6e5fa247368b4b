import numpy as np
import pytest

from polyclf.errors import (
    AssumptionViolated,
    DegenerateHull,
    EmptyPolyhedron,
    Infeasible,
)
from polyclf.geometry import HPolyhedron, enumerate_vertices, perturb_to_simple
from polyclf.model import LinearSystem, QuadraticCost
from polyclf.template import (
    ConfigurationTriplet,
    build_polytope_triplet,
    build_triplet,
    make_template_s1,
    make_template_s2,
    make_template_s3,
    max_ci_domain,
    validate_triplet,
)

from oracles import in_hull_plus_vertical_ray

EPI_ABS_F = np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, -1.0], [-1.0, -1.0]])
EPI_ABS_Z = np.array([1.0, 1.0, 0.0, 0.0])


def _paper_system():
    return LinearSystem(np.array([[1.0, 1.0], [0.0, 1.0]]),
                        np.array([[0.5], [1.0]]),
                        HPolyhedron.box([-1, -1], [2, 2]),
                        HPolyhedron.box([-0.5], [0.5]))


def test_epi_abs_triplet_hand_values():
    t = build_triplet(EPI_ABS_F, EPI_ABS_Z, kind="nominal")
    assert (t.f1, t.f2, t.v) == (2, 2, 3)
    pts = t.vertex_points(t.z_bar)
    assert np.allclose(pts[0], [0.0, 0.0], atol=1e-12)  # lowest vertex first
    assert sorted(map(tuple, np.round(pts[1:], 9))) == [(-1.0, 1.0), (1.0, 1.0)]
    # hand-computed vertex matrix for the apex: rows 2,3 active,
    # normalized lower rows are (1,-1)/sqrt(2) and (-1,-1)/sqrt(2)
    s = np.sqrt(2.0)
    Minv = np.linalg.inv(np.array([[1 / s, -1 / s], [-1 / s, -1 / s]]))
    V1_expected = np.zeros((2, 4))
    V1_expected[:, [2, 3]] = Minv
    assert np.allclose(t.V[0], V1_expected, atol=1e-12)


def test_triplet_vertex_feasibility_on_random_z():
    t = build_triplet(EPI_ABS_F, EPI_ABS_Z, kind="nominal")
    rng = np.random.default_rng(2)
    for _ in range(100):
        z = t.z_bar + rng.uniform(-0.2, 0.2, t.f)
        if np.max(t.E @ z) <= 0:
            pts = t.vertex_points(z)
            assert np.max(pts @ t.F.T - z) <= 1e-8


def test_hrep_vrep_cross_membership():
    t = build_triplet(EPI_ABS_F, EPI_ABS_Z, kind="nominal")
    rng = np.random.default_rng(3)
    for _ in range(30):
        z = t.z_bar + rng.uniform(-0.15, 0.15, t.f)
        if np.max(t.E @ z) > 0:
            continue
        pts = t.vertex_points(z)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        hi = hi + np.array([0.0, 1.0])
        for _ in range(10):
            cand = rng.uniform(lo, hi)
            in_h = np.max(t.F @ cand - z) <= 1e-9
            in_v = in_hull_plus_vertical_ray(cand, pts)
            assert in_h == in_v or (in_h and in_v)


def test_robust_kind_requires_flat_row():
    with pytest.raises(AssumptionViolated):
        build_triplet(EPI_ABS_F, EPI_ABS_Z, kind="robust")


def test_robust_kind_flat_vertices_last():
    F = np.vstack([EPI_ABS_F[:2],
                   EPI_ABS_F[2:],
                   np.array([[0.0, -1.0]])])
    z = np.concatenate([EPI_ABS_Z[:2], [0.3, 0.3], [0.2]])
    # lower the flat facet so it truncates the tip: y >= -0.2 is active
    t = build_triplet(F, z, kind="robust")
    assert t.kind == "robust"
    flat = t.f - 1
    on_flat = [flat in J for J in t.active_sets]
    # flat-facet vertices occupy the tail of the ordering
    first_flat = on_flat.index(True)
    assert all(on_flat[first_flat:])


def test_assumption_violations():
    # h > 0 row
    F_bad = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(AssumptionViolated):
        build_triplet(F_bad, np.ones(3), kind="nominal")
    # unbounded domain block (only one direction)
    F_half = np.array([[1.0, 0.0], [0.5, -1.0], [-0.5, -1.0]])
    with pytest.raises(AssumptionViolated):
        build_triplet(F_half, np.ones(3), kind="nominal")


def test_full_and_reduced_modes_accept_identically():
    rng = np.random.default_rng(9)
    for f1, f2, seed in [(4, 3, 0), (5, 8, 1), (8, 12, 2)]:
        F, zb = make_template_s1(f1, f2, seed=seed)
        tf = build_triplet(F, zb, e_mode="full")
        tr = build_triplet(F, zb, e_mode="reduced")
        assert tr.e <= tf.e
        agree = 0
        for _ in range(200):
            z = tf.z_bar + rng.uniform(-0.5, 0.5, tf.f)
            a = np.max(tf.E @ z) <= 1e-8
            b = np.max(tr.E @ z) <= 1e-8
            agree += a == b
        assert agree == 200


def test_validate_triplet_passes_and_counts():
    t = build_triplet(EPI_ABS_F, EPI_ABS_Z, kind="nominal")
    rep = validate_triplet(t, trials=50, seed=1)
    assert rep.passed
    assert rep.trials == 50
    assert rep.points_checked > 0
    rep0 = validate_triplet(t, trials=0, seed=1)
    assert rep0.passed and rep0.points_checked == 0


def test_validate_detects_missing_edge_row():
    t = build_triplet(EPI_ABS_F, EPI_ABS_Z, kind="nominal", e_mode="reduced")
    # drop one row of E: some feasible z now breaks the configuration
    E = t.E.toarray()[:-1]
    crippled = ConfigurationTriplet(
        F=t.F, z_bar=t.z_bar, E=__import__("scipy.sparse", fromlist=["x"]).csr_matrix(E),
        V=t.V, f1=t.f1, f2=t.f2, kind=t.kind, active_sets=t.active_sets)
    found = False
    for seed in range(6):
        rep = validate_triplet(crippled, trials=200, seed=seed)
        if not rep.passed:
            found = True
            break
    assert found


def test_make_template_s1_shapes_and_determinism():
    F1, z1 = make_template_s1(4, 6, seed=7)
    F2, z2 = make_template_s1(4, 6, seed=7)
    assert np.array_equal(F1, F2) and np.array_equal(z1, z2)
    assert F1.shape == (10, 3)
    assert np.all(z1 == 1.0)
    assert np.allclose(F1[:4, -1], 0.0)
    assert np.all(F1[4:, -1] < 0)
    t = build_triplet(F1, z1, kind="nominal")
    assert t.v >= 5
    with pytest.raises(ValueError):
        make_template_s1(4, 0, seed=1)
    with pytest.raises(ValueError):
        make_template_s1(2, 3, seed=1)


def test_make_template_s1_robust_has_flat_row():
    F, z = make_template_s1(4, 5, seed=3, kind="robust")
    assert np.allclose(F[-1], [0.0, 0.0, -1.0])
    t = build_triplet(F, z, kind="robust")
    assert t.kind == "robust"


def test_make_template_s2_delegates_to_bounds():
    sys = _paper_system()
    cost = QuadraticCost(np.diag([1.0, 0.1]), np.array([[0.1]]))
    F, _ = make_template_s1(4, 4, seed=5)
    F2, zeta = make_template_s2(F, sys, cost, None, N=0)
    assert np.array_equal(F, F2)
    # N=0, Mbar=0: domain rows are supports of the state box
    for i in range(4):
        g = F[i, :2]
        from polyclf.geometry import support
        assert zeta[i] == pytest.approx(support(sys.X, g), abs=1e-7)
    # rows with h < 0 and Mbar=0 maximize h * 0 = 0 plus the support part
    assert zeta.shape == (8,)


def test_make_template_s3_1d_interpolant():
    sys = LinearSystem(np.array([[0.5]]), np.array([[1.0]]),
                       HPolyhedron.box([-1.0], [1.0]),
                       HPolyhedron.box([-1.0], [1.0]))
    cost = QuadraticCost(np.array([[1.0]]), np.array([[1.0]]))
    dom = HPolyhedron.box([-1.0], [1.0])
    samples = np.array([[-1.0], [0.0], [1.0]])
    F, zb = make_template_s3(dom, samples, sys, cost, None, N=1)
    assert F.shape[0] - 2 == 2  # two lower segments
    # the interpolant reproduces the sampled values at the samples
    t = build_triplet(F, perturb_to_simple(F, zb, 1e-9, seed=0), kind="nominal")
    from polyclf.bounds import finite_horizon_cost
    from polyclf import pwa
    M = pwa.PwaFunction(t, t.z_bar)
    for x in samples:
        J = finite_horizon_cost(sys, cost, None, 1, x, state_set=dom)
        assert M.eval(x) == pytest.approx(J, abs=1e-6)
    assert M.eval([0.0]) == pytest.approx(0.0, abs=1e-6)


def test_make_template_s3_degenerate():
    sys = _paper_system()
    cost = QuadraticCost(np.diag([1.0, 0.1]), np.array([[0.1]]))
    dom = HPolyhedron.box([-0.5, -0.5], [0.5, 0.5])
    with pytest.raises(DegenerateHull):
        make_template_s3(dom, np.array([[0.0, 0.0]]), sys, cost, None, N=1)
    collinear = np.array([[-0.4, 0.0], [0.0, 0.0], [0.4, 0.0], [0.2, 0.0]])
    with pytest.raises(DegenerateHull):
        make_template_s3(dom, collinear, sys, cost, None, N=1)


def test_max_ci_domain_is_contractive():
    sys = _paper_system()
    ang = np.pi / 8 + np.arange(8) * np.pi / 4
    G1 = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    lam = 0.95
    dom = max_ci_domain(G1, sys, lam=lam)
    dt = build_polytope_triplet(G1, np.ones(8))
    # vertex condition: each vertex admits an input into the shrunk domain
    from scipy.optimize import linprog
    for x in dt.vertex_points(dom.z):
        res = linprog(np.zeros(1),
                      A_ub=np.vstack([dom.F @ sys.B, [[1.0]], [[-1.0]]]),
                      b_ub=np.concatenate([lam * dom.z - dom.F @ sys.A @ x,
                                           [0.5, 0.5]]),
                      bounds=[(None, None)], method="highs")
        assert res.status == 0
