"""Piecewise-affine function reconstruction and the explicit feedback law.

A PwaFunction pairs a configuration triplet with a feasible facet parameter
z. Values follow the epigraph formula max_j (z2 - G2 x)_j / (h2)_j on the
domain polytope {G1 x <= z1}. Point location returns the maximizing lower
facet, and the explicit controller interpolates the per-vertex inputs over
the located region with a deterministic fan triangulation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRegion, OutOfDomain
from .geometry import HPolyhedron, support

LOCATE_TOL = 1e-9


@dataclass
class Region:
    """Projection of one lower facet onto the domain."""

    facet: int                # local index into the lower-facet block
    vertex_ids: list          # epigraph vertex indices on this facet
    points: np.ndarray        # their domain projections, one row per vertex
    cycle: list = field(default_factory=list)   # fan order (2-D regions)


class PwaFunction:
    def __init__(self, triplet, z):
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != triplet.f:
            raise ValueError("facet parameter length does not match the triplet")
        worst = float(np.max(triplet.E @ z))
        if worst > 1e-6:
            raise ValueError(f"parameter violates the configuration by {worst:.2e}")
        self.triplet = triplet
        self.z = z
        self.z1 = z[: triplet.f1]
        self.z2 = z[triplet.f1:]
        self.G1 = triplet.G1
        self.G2 = triplet.G2
        self.h2 = triplet.h2
        self.vertex_points = triplet.vertex_points(z)
        self.regions = self._build_regions()

    # -- evaluation ------------------------------------------------------

    def in_domain(self, x, tol=LOCATE_TOL) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        return bool(np.all(self.G1 @ x <= self.z1 + tol))

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        if not self.in_domain(x):
            return float("inf")
        vals = (self.z2 - self.G2 @ x) / self.h2
        return float(np.max(vals))

    def eval_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        inside = np.all(X @ self.G1.T <= self.z1 + LOCATE_TOL, axis=1)
        vals = (self.z2[None, :] - X @ self.G2.T) / self.h2[None, :]
        out = np.max(vals, axis=1)
        out[~inside] = np.inf
        return out

    def locate(self, x) -> int:
        """Index of the lower facet attaining the maximum (ties: lowest index)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if not self.in_domain(x):
            raise OutOfDomain(f"{x} is outside the domain polytope")
        vals = (self.z2 - self.G2 @ x) / self.h2
        best = float(np.max(vals))
        return int(np.flatnonzero(vals >= best - LOCATE_TOL)[0])

    @property
    def domain(self) -> HPolyhedron:
        return HPolyhedron(self.G1, self.z1)

    def lipschitz_bound(self) -> float:
        """Largest gradient norm over the affine pieces."""
        grads = -self.G2 / self.h2[:, None]
        return float(np.max(np.linalg.norm(grads, axis=1)))

    # -- regions ----------------------------------------------------------

    def _build_regions(self):
        t = self.triplet
        regions = []
        for j_local in range(t.f2):
            facet_global = t.f1 + j_local
            ids = [i for i, J in enumerate(t.active_sets) if facet_global in J]
            pts = self.vertex_points[ids][:, :-1] if ids else np.zeros((0, t.n_x))
            cycle = []
            if len(ids) >= 3 and t.n_x == 2:
                center = pts.mean(axis=0)
                ang = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
                order = list(np.argsort(ang))
                start = int(np.argmin([ids[k] for k in order]))
                cycle = order[start:] + order[:start]
            regions.append(Region(facet=j_local, vertex_ids=ids, points=pts,
                                  cycle=cycle))
        return regions


@dataclass
class ExplicitController:
    pwa: PwaFunction
    vertex_controls: np.ndarray   # one row per epigraph vertex
    degenerate_hits: int = 0

    def __post_init__(self):
        self.vertex_controls = np.atleast_2d(
            np.asarray(self.vertex_controls, dtype=float))
        if self.vertex_controls.shape[0] != self.pwa.triplet.v:
            raise ValueError("one control per epigraph vertex required")

    def feedback(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        j = self.pwa.locate(x)
        region = self.pwa.regions[j]
        theta, ids = _barycentric(region, x, self)
        return theta @ self.vertex_controls[ids]


def _solve_simplex(corners, x):
    """Barycentric coordinates of x in the simplex spanned by corners."""
    k = corners.shape[0]
    A = np.vstack([corners.T, np.ones((1, k))])
    b = np.concatenate([x, [1.0]])
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return None


def _barycentric(region: Region, x, controller=None):
    pts = region.points
    ids = np.asarray(region.vertex_ids)
    k = pts.shape[0]
    n_x = x.size
    if k == 0:
        raise DegenerateRegion("region has no vertices")
    if k == 1:
        return np.array([1.0]), ids
    if n_x == 1 or k == 2:
        d = pts[1] - pts[0]
        denom = float(d @ d)
        if denom < 1e-16:
            return _lstsq_theta(pts, x, ids, controller)
        t = float(np.clip((x - pts[0]) @ d / denom, 0.0, 1.0))
        return np.array([1.0 - t, t]), ids
    if n_x == 2:
        cyc = region.cycle if region.cycle else list(range(k))
        best = None
        for a in range(1, k - 1):
            tri = [cyc[0], cyc[a], cyc[a + 1]]
            theta = _solve_simplex(pts[tri], x)
            if theta is None:
                continue
            low = float(np.min(theta))
            if low >= -1e-9:
                theta = np.clip(theta, 0.0, None)
                theta = theta / theta.sum()
                return theta, ids[tri]
            if best is None or low > best[0]:
                best = (low, theta, tri)
        if best is not None and best[0] >= -1e-6:
            theta = np.clip(best[1], 0.0, None)
            theta = theta / theta.sum()
            return theta, ids[best[2]]
        return _lstsq_theta(pts, x, ids, controller)
    # higher dimensions: Delaunay over the region vertices
    from scipy.spatial import Delaunay, QhullError
    try:
        tri = Delaunay(pts)
    except QhullError:
        return _lstsq_theta(pts, x, ids, controller)
    s = tri.find_simplex(x[None, :])[0]
    if s < 0:
        return _lstsq_theta(pts, x, ids, controller)
    simplex = tri.simplices[s]
    theta = _solve_simplex(pts[simplex], x)
    if theta is None:
        return _lstsq_theta(pts, x, ids, controller)
    theta = np.clip(theta, 0.0, None)
    return theta / theta.sum(), ids[simplex]


def _lstsq_theta(pts, x, ids, controller=None):
    """Least-squares convex weights with a simplex projection fallback."""
    k = pts.shape[0]
    A = np.vstack([pts.T, np.ones((1, k))])
    b = np.concatenate([x, [1.0]])
    theta, *_ = np.linalg.lstsq(A, b, rcond=None)
    theta = _project_simplex(theta)
    if controller is not None:
        controller.degenerate_hits += 1
    return theta, ids


def _project_simplex(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.flatnonzero(u * np.arange(1, v.size + 1) > (css - 1.0))
    if rho.size == 0:
        out = np.zeros_like(v)
        out[int(np.argmax(v))] = 1.0
        return out
    r = rho[-1]
    tau = (css[r] - 1.0) / (r + 1.0)
    return np.clip(v - tau, 0.0, None)


# ---------------------------------------------------------------------------
# module-level mirrors and residuals
# ---------------------------------------------------------------------------

def eval(M: PwaFunction, x) -> float:  # noqa: A001 - spec operation name
    return M.eval(x)


def locate(M: PwaFunction, x) -> int:
    return M.locate(x)


def feedback(c: ExplicitController, x) -> np.ndarray:
    return c.feedback(x)


@dataclass
class USearch:
    grid_res: int = 41
    refine_iters: int = 60


def _u_box(U: HPolyhedron):
    n_u = U.dim
    lo = np.array([-support(U, -np.eye(n_u)[k]) for k in range(n_u)])
    hi = np.array([support(U, np.eye(n_u)[k]) for k in range(n_u)])
    return lo, hi


def _bellman_rhs_factory(M: PwaFunction, sys, cost, unc):
    if unc is None:
        models = [(sys.A, sys.B, np.zeros(sys.n_x))]
    else:
        Wv = unc.w_vertices()
        models = [(A_l, B_l, w) for A_l, B_l in unc.AB_vertices for w in Wv]

    def value(x, u):
        if not np.all(sys.U.F @ u <= sys.U.z + 1e-12):
            return np.inf
        worst = -np.inf
        for A_l, B_l, w in models:
            nxt = A_l @ x + B_l @ u + w
            worst = max(worst, M.eval(nxt))
            if worst == np.inf:
                return np.inf
        return cost.eval(x, u) + worst

    return value


def _golden_min(fn, lo, hi, iters):
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fn(d)
    xm = 0.5 * (a + b)
    return xm, fn(xm)


def _feasible_u_interval(M: PwaFunction, sys, unc, x):
    """Scalar-input window keeping every uncertainty branch inside dom(M)."""
    lo, hi = _u_box(sys.U)
    lo, hi = float(lo[0]), float(hi[0])
    if unc is None:
        models = [(sys.A, sys.B, np.zeros(sys.n_x))]
    else:
        Wv = unc.w_vertices()
        models = [(A_l, B_l, w) for A_l, B_l in unc.AB_vertices for w in Wv]
    for A_l, B_l, w in models:
        base = M.G1 @ (A_l @ x + w) - M.z1
        gain = (M.G1 @ B_l).reshape(-1)
        for r in range(base.size):
            if gain[r] > 1e-12:
                hi = min(hi, -base[r] / gain[r])
            elif gain[r] < -1e-12:
                lo = max(lo, -base[r] / gain[r])
            elif base[r] > LOCATE_TOL:
                return None
    if lo > hi + LOCATE_TOL:
        return None
    return lo, min(hi, max(lo, hi))


def bellman_rhs(M: PwaFunction, sys, cost, unc, x, u_search: USearch = USearch()):
    """min over admissible u of (worst-case) stage cost plus next value."""
    x = np.asarray(x, dtype=float).reshape(-1)
    value = _bellman_rhs_factory(M, sys, cost, unc)
    lo, hi = _u_box(sys.U)
    n_u = sys.n_u
    if n_u == 1:
        window = _feasible_u_interval(M, sys, unc, x)
        if window is None:
            return float("inf"), np.array([0.0])
        wlo, whi = window
        if whi - wlo < 1e-14:
            u0 = np.array([0.5 * (wlo + whi)])
            return float(value(x, u0)), u0
        grid = np.linspace(wlo, whi, u_search.grid_res)
        vals = [value(x, np.array([u])) for u in grid]
        k = int(np.argmin(vals))
        a = grid[max(k - 1, 0)]
        b = grid[min(k + 1, grid.size - 1)]
        u_star, v_star = _golden_min(lambda u: value(x, np.array([u])), a, b,
                                     u_search.refine_iters)
        if vals[k] < v_star:
            return float(vals[k]), np.array([grid[k]])
        return float(v_star), np.array([u_star])
    # coordinate descent over the bounding box with membership rejection
    axes = [np.linspace(lo[d], hi[d], u_search.grid_res) for d in range(n_u)]
    mesh = np.meshgrid(*axes, indexing="ij")
    cand = np.stack([m.ravel() for m in mesh], axis=1)
    vals = [value(x, u) for u in cand]
    k = int(np.argmin(vals))
    u_best = cand[k].copy()
    v_best = vals[k]
    for _ in range(3):
        for d in range(n_u):
            def fn(s):
                u = u_best.copy()
                u[d] = s
                return value(x, u)
            s_star, v = _golden_min(fn, lo[d], hi[d], u_search.refine_iters)
            if v < v_best:
                u_best[d] = s_star
                v_best = v
    return float(v_best), u_best


def hjb_residual(M: PwaFunction, sys, cost, unc, x,
                 u_search: USearch = USearch()) -> float:
    """M(x) minus the Bellman right-hand side; nonnegative for a CLF."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if not M.in_domain(x):
        raise OutOfDomain(f"{x} is outside dom(M)")
    rhs, _ = bellman_rhs(M, sys, cost, unc, x, u_search)
    return M.eval(x) - rhs


def optimal_feedback(M: PwaFunction, sys, cost, x, unc=None,
                     u_search: USearch = USearch()) -> np.ndarray:
    """Exact-mode feedback: re-solves the one-step problem at the query point."""
    _, u = bellman_rhs(M, sys, cost, unc, x, u_search)
    return u


def max_relative_error(M: PwaFunction, reference) -> float:
    """Max |M - ref| over finite reference cells in dom(M), over max ref."""
    pts = reference.grid_points()
    ref_vals = reference.values.ravel()
    m_vals = M.eval_many(pts)
    mask = np.isfinite(ref_vals) & np.isfinite(m_vals)
    if not np.any(mask):
        raise ValueError("domains do not overlap")
    denom = reference.max_finite()
    if not np.isfinite(denom) or denom <= 0:
        raise ValueError("reference has no positive finite values")
    return float(np.max(np.abs(m_vals[mask] - ref_vals[mask])) / denom)


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def export_partition_csv(M: PwaFunction, path):
    """Region polygons: one row per (region id, vertex) in cycle order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "vertex_id"] + [f"x{d + 1}" for d in range(M.triplet.n_x)])
        for region in M.regions:
            order = region.cycle if region.cycle else range(len(region.vertex_ids))
            for k in order:
                w.writerow([region.facet, region.vertex_ids[k]]
                           + list(region.points[k]))


def sample_contours(M: PwaFunction, levels, res: int = 256):
    """Grid-sampled sublevel indicator data for external contour plotting."""
    verts = M.vertex_points[:, :-1]
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    axes = [np.linspace(lo[d], hi[d], res) for d in range(M.triplet.n_x)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = M.eval_many(pts)
    out = {}
    for lev in levels:
        if lev < 0:
            raise ValueError("contour levels must be nonnegative")
        out[lev] = np.column_stack([pts, (vals <= lev).astype(float)])
    return out


def export_contours_csv(M: PwaFunction, levels, path_prefix, res: int = 256):
    data = sample_contours(M, levels, res)
    paths = []
    for lev, arr in data.items():
        path = f"{path_prefix}_level_{lev}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{d + 1}" for d in range(M.triplet.n_x)] + ["inside"])
            w.writerows(arr.tolist())
        paths.append(path)
    return paths
