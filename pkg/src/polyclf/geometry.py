"""H-representation polyhedra: vertex enumeration, simplicity, supports.

All facet rows are normalized to unit Euclidean norm on ingestion, so the
active-set tolerance ACTIVE_TOL is an absolute distance. Vertex enumeration
dispatches between a brute-force active-set scan (robust, handles degenerate
vertices) and adjacency pivoting (fast, requires a simple polyhedron). The
crossover is BRUTE_FORCE_CAP candidate active sets; above it the pivoting
path is used.

Unbounded polyhedra are supported only when their recession cone is the ray
of the last coordinate (epigraph shape): a temporary cap facet y <= cap is
added and vertices touching the cap are discarded.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import (
    EmptyPolyhedron,
    Infeasible,
    NotPointed,
    NotSimple,
    PerturbationFailed,
    Unbounded,
)

ACTIVE_TOL = 1e-9
BRUTE_FORCE_CAP = 5000


class HPolyhedron:
    """Polyhedron { x | F x <= z } with unit-norm facet rows."""

    __slots__ = ("F", "z")

    def __init__(self, F, z):
        F = np.atleast_2d(np.asarray(F, dtype=float))
        z = np.asarray(z, dtype=float).reshape(-1)
        if F.shape[0] != z.shape[0]:
            raise ValueError(
                f"facet matrix has {F.shape[0]} rows but parameter has {z.shape[0]}"
            )
        norms = np.linalg.norm(F, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("all-zero facet row")
        self.F = F / norms[:, None]
        self.z = z / norms
        self.F.flags.writeable = False
        self.z.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.F.shape[1]

    @property
    def n_rows(self) -> int:
        return self.F.shape[0]

    def contains(self, x, tol: float = ACTIVE_TOL) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        return bool(np.all(self.F @ x <= self.z + tol))

    def contains_many(self, X, tol: float = ACTIVE_TOL) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.all(X @ self.F.T <= self.z + tol, axis=1)

    def to_json(self) -> dict:
        return {"F": self.F.tolist(), "z": self.z.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "HPolyhedron":
        return cls(np.asarray(obj["F"]), np.asarray(obj["z"]))

    @classmethod
    def box(cls, lo, hi) -> "HPolyhedron":
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        n = lo.size
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    def __repr__(self):
        return f"HPolyhedron(m={self.n_rows}, n={self.dim})"


@dataclass(frozen=True)
class VertexInfo:
    point: np.ndarray
    active_set: tuple

    def __post_init__(self):
        object.__setattr__(self, "active_set", tuple(sorted(self.active_set)))


def _lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    n = len(c)
    if bounds is None:
        bounds = [(None, None)] * n
    return linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                   bounds=bounds, method="highs")


def find_interior_point(poly: HPolyhedron):
    """Chebyshev-style feasible point, or None when the polyhedron is empty.

    Maximizes the slack margin r subject to F x + r <= z, r <= 1. Rows are
    unit norm, so r is a true distance margin.
    """
    m, n = poly.F.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([poly.F, np.ones((m, 1))])
    bounds = [(None, None)] * n + [(None, 1.0)]
    res = _lp(c, A_ub=A, b_ub=poly.z, bounds=bounds)
    if res.status == 2:
        return None
    if res.status != 0:
        return None
    x = res.x[:n]
    if np.any(poly.F @ x > poly.z + 1e-7):
        return None
    return x


def _recession_cone_check(F: np.ndarray):
    """Classify the recession cone {d | F d <= 0}.

    Returns True when the vertical ray e_n lies in the cone (polyhedron is
    unbounded upward). Raises NotPointed when the cone contains a nonzero
    direction outside that ray.
    """
    m, n = F.shape
    has_vertical = bool(np.all(F[:, -1] <= 1e-12))
    # The cone is inside the vertical ray iff no other coordinate direction
    # (and no downward vertical component) is attainable.
    objectives = []
    for i in range(n - 1):
        e = np.zeros(n)
        e[i] = 1.0
        objectives.append(e)
        objectives.append(-e)
    down = np.zeros(n)
    down[-1] = -1.0
    objectives.append(down)
    box = [(-1.0, 1.0)] * n
    for obj in objectives:
        res = _lp(-obj, A_ub=F, b_ub=np.zeros(m), bounds=box)
        if res.status == 0 and -res.fun > 1e-8:
            raise NotPointed(
                "recession cone has a direction outside the vertical ray: "
                f"{np.round(res.x, 6)}"
            )
    return has_vertical


def _dedup_points(points, active_sets, tol=1e-8):
    P = np.asarray(points)
    order = np.lexsort(P.T[::-1])
    out_pts, out_act = [], []
    for idx in order:
        p = points[idx]
        if out_pts and np.max(np.abs(out_pts[-1] - p)) <= tol:
            # same vertex reached through another basis; merge active sets
            out_act[-1] = out_act[-1] | set(active_sets[idx])
            continue
        out_pts.append(p)
        out_act.append(set(active_sets[idx]))
    return out_pts, out_act


def _enumerate_brute(F, z):
    m, n = F.shape
    points, actives = [], []
    for J in itertools.combinations(range(m), n):
        B = F[list(J)]
        try:
            x = np.linalg.solve(B, z[list(J)])
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(x)):
            continue
        resid = F @ x - z
        if np.max(resid) > ACTIVE_TOL:
            continue
        active = np.flatnonzero(resid >= -ACTIVE_TOL)
        points.append(x)
        actives.append(tuple(active))
    if not points:
        return []
    pts, acts = _dedup_points(points, actives)
    return [VertexInfo(p, tuple(sorted(a))) for p, a in zip(pts, acts)]


def _initial_vertex(F, z, rng):
    m, n = F.shape
    for _ in range(12):
        c = rng.standard_normal(n)
        c /= np.linalg.norm(c)
        res = _lp(c, A_ub=F, b_ub=z)
        if res.status == 2:
            return None
        if res.status == 3:
            raise Unbounded("LP unbounded while seeking an initial vertex")
        if res.status != 0:
            continue
        x = res.x
        active = np.flatnonzero(np.abs(F @ x - z) <= ACTIVE_TOL)
        if len(active) < n:
            continue
        if len(active) > n:
            raise NotSimple(
                f"initial vertex has {len(active)} active facets in dimension {n}"
            )
        x = np.linalg.solve(F[active], z[active])
        return x, tuple(active)
    raise NotSimple("could not find a nondegenerate initial vertex")


def _enumerate_pivot(F, z, rng):
    """Adjacency pivoting over the vertices of a simple bounded polyhedron."""
    m, n = F.shape
    start = _initial_vertex(F, z, rng)
    if start is None:
        return []
    x0, J0 = start
    seen = {J0: x0}
    stack = [J0]
    while stack:
        J = stack.pop()
        x = seen[J]
        B = F[list(J)]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise NotSimple(f"singular active-set basis at vertex {J}")
        slacks = z - F @ x
        for pos, k in enumerate(J):
            d = -Binv[:, pos]
            Fd = F @ d
            cand = np.flatnonzero(Fd > 1e-11)
            cand = cand[~np.isin(cand, J)]
            if cand.size == 0:
                raise Unbounded(
                    f"unbounded edge leaving facet {k}; polyhedron is not capped"
                )
            steps = slacks[cand] / Fd[cand]
            steps = np.maximum(steps, 0.0)
            t_min = steps.min()
            blockers = cand[steps <= t_min + ACTIVE_TOL]
            if len(blockers) > 1:
                raise NotSimple(
                    f"tie while pivoting from vertex {J}: facets {blockers.tolist()}"
                )
            j_star = int(blockers[0])
            J_new = tuple(sorted(set(J) - {k} | {j_star}))
            if J_new in seen:
                continue
            x_new = np.linalg.solve(F[list(J_new)], z[list(J_new)])
            if np.max(F @ x_new - z) > 1e-7:
                raise NotSimple(f"pivot produced an infeasible basis {J_new}")
            seen[J_new] = x_new
            stack.append(J_new)
    out = []
    for J, x in seen.items():
        active = np.flatnonzero(np.abs(F @ x - z) <= ACTIVE_TOL)
        if len(active) != n:
            raise NotSimple(f"vertex {np.round(x, 9)} has {len(active)} active facets")
        out.append(VertexInfo(x, tuple(active)))
    out.sort(key=lambda v: tuple(v.point))
    return out


def enumerate_vertices(poly: HPolyhedron, recession_cap=None, method: str = "auto",
                       seed: int = 0):
    """All vertices of the polyhedron with their active facet sets.

    For unbounded polyhedra (recession cone equal to the vertical ray) a cap
    facet y <= recession_cap is appended and cap vertices are discarded; the
    cap must lie strictly above every true vertex. Results are sorted
    lexicographically by point.
    """
    F, z = poly.F, poly.z
    m, n = F.shape
    unbounded = _recession_cone_check(F)
    cap_idx = None
    if unbounded:
        if recession_cap is None:
            raise Unbounded("polyhedron is unbounded, recession_cap required")
        cap_row = np.zeros(n)
        cap_row[-1] = 1.0
        F = np.vstack([F, cap_row])
        z = np.concatenate([z, [float(recession_cap)]])
        cap_idx = m

    m_eff = F.shape[0]
    if method == "auto":
        method = "brute" if math.comb(m_eff, n) <= BRUTE_FORCE_CAP else "pivot"
    if method == "brute":
        verts = _enumerate_brute(F, z)
    elif method == "pivot":
        rng = np.random.default_rng(seed)
        verts = _enumerate_pivot(F, z, rng)
    else:
        raise ValueError(f"unknown method {method!r}")

    if cap_idx is not None:
        verts = [v for v in verts if cap_idx not in v.active_set]
    verts.sort(key=lambda v: tuple(v.point))
    return verts


def epigraph_cap(poly: HPolyhedron) -> float:
    """Cap height strictly above every vertex of an epigraph-shaped polyhedron.

    Requires the facet structure (G1 0; G2 h2) with a bounded domain block;
    the bound follows from the domain radius and the slopes of the lower
    rows.
    """
    F, z = poly.F, poly.z
    last = F[:, -1]
    dom = np.abs(last) <= 1e-10
    low = last < -1e-10
    if not np.all(dom | low) or not np.any(low) or not np.any(dom):
        raise Unbounded("cannot derive a cap: polyhedron is not epigraph shaped")
    domain = HPolyhedron(F[dom][:, :-1], z[dom])
    dverts = enumerate_vertices(domain)
    if not dverts:
        raise EmptyPolyhedron("epigraph domain is empty")
    radius = max(float(np.linalg.norm(v.point)) for v in dverts)
    G2 = F[low][:, :-1]
    h2 = last[low]
    ymax = float(np.max((np.abs(z[low]) + np.linalg.norm(G2, axis=1) * radius)
                        / np.abs(h2)))
    return 2.0 * max(ymax, 0.0) + 1.0


def is_simple(poly: HPolyhedron, recession_cap=None) -> bool:
    """True when every vertex has exactly dim active facets."""
    try:
        verts = enumerate_vertices(poly, recession_cap=recession_cap)
    except NotSimple:
        return False
    if not verts:
        raise EmptyPolyhedron("simplicity is undefined for an empty polyhedron")
    return all(len(v.active_set) == poly.dim for v in verts)


def perturb_to_simple(F, z, epsilon: float, seed: int, recession_cap=None,
                      max_attempts: int = 60):
    """Perturbed facet parameter z' with ||z' - z||_inf <= epsilon and P(z') simple.

    Deterministic given the seed. The already-simple input is returned
    unchanged. Perturbations are drawn in the caller's row scaling.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    poly = HPolyhedron(F, z)
    if find_interior_point(poly) is None:
        raise EmptyPolyhedron("cannot perturb an empty polyhedron")

    def cap_for(candidate):
        if recession_cap is not None:
            return recession_cap
        if np.all(candidate.F[:, -1] <= 1e-12) and np.any(candidate.F[:, -1] < -1e-10):
            return epigraph_cap(candidate)
        return None

    try:
        if is_simple(poly, recession_cap=cap_for(poly)):
            return z.copy()
    except (NotSimple, Unbounded):
        pass
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        delta = rng.uniform(-epsilon, epsilon, size=z.size)
        zp = z + delta
        cand = HPolyhedron(F, zp)
        if find_interior_point(cand) is None:
            continue
        try:
            if is_simple(cand, recession_cap=cap_for(cand)):
                return zp
        except (NotSimple, Unbounded, NotPointed, EmptyPolyhedron):
            continue
    raise PerturbationFailed(
        f"no simple perturbation found in {max_attempts} attempts (epsilon={epsilon})"
    )


def support(poly: HPolyhedron, direction) -> float:
    """max of direction . x over the polyhedron, by linear program."""
    d = np.asarray(direction, dtype=float).reshape(-1)
    res = _lp(-d, A_ub=poly.F, b_ub=poly.z)
    if res.status == 2:
        raise Infeasible("support of an empty polyhedron")
    if res.status == 3:
        raise Unbounded(f"support unbounded in direction {d}")
    if res.status != 0:
        raise Infeasible(f"support LP failed with status {res.status}")
    return float(d @ res.x)
