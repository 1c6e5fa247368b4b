import numpy as np
import pytest

from polyclf.errors import (
    EmptyPolyhedron,
    Infeasible,
    NotPointed,
    PerturbationFailed,
    Unbounded,
)
from polyclf.geometry import (
    HPolyhedron,
    enumerate_vertices,
    is_simple,
    perturb_to_simple,
    support,
)

from oracles import brute_force_vertices, support_by_lp

SQUARE = HPolyhedron(np.vstack([np.eye(2), -np.eye(2)]), np.ones(4))

# epi(|x|) restricted to |x| <= 1: rows x<=1, -x<=1, x-y<=0, -x-y<=0
EPI_ABS_F = np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, -1.0], [-1.0, -1.0]])
EPI_ABS_Z = np.array([1.0, 1.0, 0.0, 0.0])


def test_row_normalization_and_validation():
    p = HPolyhedron([[2.0, 0.0]], [4.0])
    assert np.allclose(p.F, [[1.0, 0.0]])
    assert np.allclose(p.z, [2.0])
    with pytest.raises(ValueError):
        HPolyhedron([[0.0, 0.0]], [1.0])
    with pytest.raises(ValueError):
        HPolyhedron(np.eye(2), [1.0])


def test_unit_square_vertices():
    verts = enumerate_vertices(SQUARE)
    pts = np.array([v.point for v in verts])
    expect = np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], dtype=float)
    assert np.allclose(pts, expect)
    assert all(len(v.active_set) == 2 for v in verts)


def test_triangle_vertices_match_active_set_oracle():
    F = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    z = np.array([1.0, 1.0, 1.0])
    poly = HPolyhedron(F, z)
    verts = enumerate_vertices(poly)
    pts = np.array([v.point for v in verts])
    oracle = np.array(brute_force_vertices(poly.F, poly.z))
    assert np.allclose(pts, oracle)
    assert np.allclose(sorted(map(tuple, pts)),
                       [(-2.0, 1.0), (1.0, -2.0), (1.0, 1.0)])


def test_epigraph_template_capped_enumeration():
    poly = HPolyhedron(EPI_ABS_F, EPI_ABS_Z)
    verts = enumerate_vertices(poly, recession_cap=10.0)
    pts = sorted(map(tuple, (v.point for v in verts)))
    assert np.allclose(pts, [(-1.0, 1.0), (0.0, 0.0), (1.0, 1.0)])


def test_unbounded_without_cap_raises():
    poly = HPolyhedron(EPI_ABS_F, EPI_ABS_Z)
    with pytest.raises(Unbounded):
        enumerate_vertices(poly)


def test_not_pointed_raises():
    # single halfspace in the plane: recession cone is a halfplane
    poly = HPolyhedron([[1.0, 0.0]], [1.0])
    with pytest.raises(NotPointed):
        enumerate_vertices(poly)


def test_vertices_satisfy_all_rows():
    rng = np.random.default_rng(3)
    for _ in range(20):
        F = rng.standard_normal((8, 2))
        poly = HPolyhedron(F, np.ones(8))
        try:
            verts = enumerate_vertices(poly)
        except NotPointed:
            continue
        for v in verts:
            assert np.all(poly.F @ v.point <= poly.z + 1e-9)


@pytest.mark.parametrize("m,n", [(6, 2), (10, 3), (14, 4), (12, 2)])
def test_enumeration_matches_brute_oracle(m, n):
    rng = np.random.default_rng(100 + m + n)
    checked = 0
    while checked < 6:
        F = rng.standard_normal((m, n))
        z = rng.uniform(0.5, 1.5, m)
        poly = HPolyhedron(F, z)
        try:
            got = enumerate_vertices(poly)
        except NotPointed:
            continue
        oracle = brute_force_vertices(poly.F, poly.z)
        got_pts = [tuple(v.point) for v in got]
        assert len(got_pts) == len(oracle)
        for a, b in zip(got_pts, oracle):
            assert np.allclose(a, b, atol=1e-8)
        checked += 1


def test_pivot_path_agrees_with_brute_on_simple_instances():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 6:
        F = rng.standard_normal((10, 3))
        z = rng.uniform(0.5, 1.5, 10)
        poly = HPolyhedron(F, z)
        try:
            brute = enumerate_vertices(poly, method="brute")
            if not brute or any(len(v.active_set) != 3 for v in brute):
                continue
            pivot = enumerate_vertices(poly, method="pivot")
        except NotPointed:
            continue
        assert len(brute) == len(pivot)
        for a, b in zip(brute, pivot):
            assert np.allclose(a.point, b.point, atol=1e-8)
            assert a.active_set == b.active_set
        checked += 1


def test_is_simple_square_and_redundant_diagonal():
    assert is_simple(SQUARE)
    # diagonal x + y <= 2 through the corner (1,1): third active row there
    F = np.vstack([np.eye(2), -np.eye(2), [[1.0, 1.0]]])
    z = np.array([1.0, 1.0, 1.0, 1.0, 2.0])
    degen = HPolyhedron(F, z)
    verts = enumerate_vertices(degen)
    corner = [v for v in verts if np.allclose(v.point, [1.0, 1.0])]
    assert len(corner) == 1 and len(corner[0].active_set) == 3
    assert not is_simple(degen)


def test_is_simple_simplex_3d():
    F = np.vstack([-np.eye(3), np.ones((1, 3))])
    poly = HPolyhedron(F, np.array([0.0, 0.0, 0.0, 1.0]))
    assert is_simple(poly)


def test_perturb_to_simple_noop_and_degenerate():
    z = perturb_to_simple(SQUARE.F, SQUARE.z, 1e-3, seed=0)
    assert np.array_equal(z, SQUARE.z)

    F = np.vstack([np.eye(2), -np.eye(2), [[1.0, 1.0]]])
    z0 = np.array([1.0, 1.0, 1.0, 1.0, 2.0])
    zp = perturb_to_simple(F, z0, 1e-3, seed=1)
    assert np.max(np.abs(zp - z0)) <= 1e-3
    assert is_simple(HPolyhedron(F, zp))


def test_perturb_empty_raises():
    F = np.array([[1.0], [-1.0]])
    with pytest.raises(EmptyPolyhedron):
        perturb_to_simple(F, np.array([-1.0, -1.0]), 1e-6, seed=0)


def test_perturb_failure_reported():
    # epsilon far too small to break the fourfold degeneracy
    F = np.vstack([np.eye(2), -np.eye(2), [[1.0, 1.0]]])
    z0 = np.array([1.0, 1.0, 1.0, 1.0, 2.0])
    with pytest.raises(PerturbationFailed):
        perturb_to_simple(F, z0, 1e-15, seed=2, max_attempts=5)


def test_support_square_and_paper_box():
    assert support(SQUARE, [1.0, 0.0]) == pytest.approx(1.0, abs=1e-9)
    box = HPolyhedron.box([-1.0, -1.0], [2.0, 2.0])
    assert support(box, [1.0, 0.0]) == pytest.approx(2.0, abs=1e-9)
    tri = HPolyhedron(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]),
                      np.ones(3))
    assert support(tri, [1.0, 1.0]) == pytest.approx(2.0, abs=1e-8)


def test_support_errors():
    empty = HPolyhedron(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]))
    with pytest.raises(Infeasible):
        support(empty, [1.0])
    half = HPolyhedron([[1.0, 0.0]], [1.0])
    with pytest.raises(Unbounded):
        support(half, [-1.0, 0.0])


def test_support_agrees_with_vertex_maximum():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 8:
        F = rng.standard_normal((9, 3))
        poly = HPolyhedron(F, rng.uniform(0.5, 2.0, 9))
        try:
            verts = enumerate_vertices(poly)
        except NotPointed:
            continue
        if not verts:
            continue
        d = rng.standard_normal(3)
        smax = support(poly, d)
        vmax = max(float(d @ v.point) for v in verts)
        assert smax == pytest.approx(vmax, abs=1e-8)
        oracle = support_by_lp(poly.F, poly.z, d)
        assert smax == pytest.approx(oracle, abs=1e-8)
        checked += 1
