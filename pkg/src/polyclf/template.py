"""Configuration triplets (F, E, V) and template strategies.

A triplet fixes the face configuration of a polyhedron family P(z): the
vertex matrices make every vertex affine in the facet parameter z, and the
edge matrix E certifies via E z <= 0 that the facet and vertex
representations describe the same set.

Two E constructions are provided. The full mode emits one row per
(vertex, non-active facet) pair, which literally encodes that every vertex
stays feasible for every facet; it is the default because it is sound by
construction. The reduced mode keeps one row per bounded edge of the
template polyhedron (facets entered across an edge), plus all rows for
facets that touch no vertex at the template parameter. Both modes accept
the same parameters on simple templates in minimal representation; the
tests cross-check this.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from . import bounds as _bounds
from . import geometry
from .errors import (
    AssumptionViolated,
    DegenerateHull,
    EmptyPolyhedron,
    Infeasible,
    NotSimple,
    PerturbationFailed,
)
from .geometry import HPolyhedron, enumerate_vertices, is_simple


@dataclass
class PolytopeTriplet:
    """Triplet of a bounded polytope (used for domain and target sets)."""

    F: np.ndarray
    z_bar: np.ndarray
    E: sparse.csr_matrix
    V: list
    active_sets: list

    @property
    def n(self) -> int:
        return self.F.shape[1]

    @property
    def f(self) -> int:
        return self.F.shape[0]

    @property
    def v(self) -> int:
        return len(self.V)

    def vertex_points(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float).reshape(-1)
        return np.array([Vi @ z for Vi in self.V])


@dataclass
class ConfigurationTriplet:
    """Epigraph triplet with the facet split (G1 0; G2 h2)."""

    F: np.ndarray
    z_bar: np.ndarray
    E: sparse.csr_matrix
    V: list
    f1: int
    f2: int
    kind: str
    active_sets: list
    e_mode: str = "full"

    @property
    def n(self) -> int:
        return self.F.shape[1]

    @property
    def n_x(self) -> int:
        return self.F.shape[1] - 1

    @property
    def f(self) -> int:
        return self.F.shape[0]

    @property
    def v(self) -> int:
        return len(self.V)

    @property
    def e(self) -> int:
        return self.E.shape[0]

    @property
    def G1(self) -> np.ndarray:
        return self.F[: self.f1, : self.n_x]

    @property
    def G2(self) -> np.ndarray:
        return self.F[self.f1:, : self.n_x]

    @property
    def h2(self) -> np.ndarray:
        return self.F[self.f1:, -1]

    def R(self, i) -> np.ndarray:
        return self.V[i][:-1, :]

    def s(self, i) -> np.ndarray:
        return self.V[i][-1, :]

    def vertex_points(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float).reshape(-1)
        return np.array([Vi @ z for Vi in self.V])

    def domain(self, z) -> HPolyhedron:
        z = np.asarray(z, dtype=float).reshape(-1)
        return HPolyhedron(self.G1, z[: self.f1])

    def to_json(self) -> dict:
        E = self.E.tocoo()
        order = np.lexsort((E.col, E.row))
        return {
            "F": self.F.tolist(),
            "E": {"shape": list(E.shape), "rows": E.row[order].tolist(),
                  "cols": E.col[order].tolist(), "vals": E.data[order].tolist()},
            "V": [Vi.tolist() for Vi in self.V],
            "f1": self.f1,
            "f2": self.f2,
            "kind": self.kind,
            "z_bar": self.z_bar.tolist(),
            "e_mode": self.e_mode,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConfigurationTriplet":
        F = np.asarray(obj["F"], dtype=float)
        Eobj = obj["E"]
        if isinstance(Eobj, dict):
            E = sparse.coo_matrix(
                (Eobj["vals"], (Eobj["rows"], Eobj["cols"])),
                shape=tuple(Eobj["shape"])).tocsr()
        else:
            E = sparse.csr_matrix(np.asarray(Eobj, dtype=float))
        V = [np.asarray(Vi, dtype=float) for Vi in obj["V"]]
        actives = [tuple(sorted(np.flatnonzero(
            np.linalg.norm(Vi, axis=0) > 1e-14))) for Vi in V]
        return cls(F=F, z_bar=np.asarray(obj["z_bar"], dtype=float), E=E, V=V,
                   f1=int(obj["f1"]), f2=int(obj["f2"]), kind=obj["kind"],
                   active_sets=actives, e_mode=obj.get("e_mode", "full"))


@dataclass
class ValidationReport:
    trials: int = 0
    points_checked: int = 0
    failures: list = field(default_factory=list)
    ties_flagged: int = 0

    @property
    def passed(self) -> bool:
        return not self.failures


# ---------------------------------------------------------------------------
# triplet construction
# ---------------------------------------------------------------------------

def _vertex_matrices(F, actives):
    n = F.shape[1]
    f = F.shape[0]
    out = []
    for J in actives:
        M = np.linalg.inv(F[list(J)])
        Vi = np.zeros((n, f))
        Vi[:, list(J)] = M
        out.append(Vi)
    return out


def _edges_of(Fc, zc, points, actives, amap, cap_idx):
    """Bounded edges of the capped polytope as (i, entering_facet) pairs.

    One entry per edge, recorded from the endpoint with the smaller vertex
    index. Vertical (capped) edges are skipped.
    """
    edges = []
    for i, (x, J) in enumerate(zip(points, actives)):
        B = Fc[list(J)]
        Binv = np.linalg.inv(B)
        slacks = zc - Fc @ x
        for pos, k in enumerate(J):
            d = -Binv[:, pos]
            Fd = Fc @ d
            cand = np.flatnonzero(Fd > 1e-11)
            cand = cand[~np.isin(cand, J)]
            if cand.size == 0:
                raise NotSimple("unbounded edge outside the vertical ray")
            steps = np.maximum(slacks[cand] / Fd[cand], 0.0)
            j_star = int(cand[np.argmin(steps)])
            if cap_idx is not None and j_star == cap_idx:
                continue
            J_new = tuple(sorted(set(J) - {k} | {j_star}))
            i_new = amap.get(J_new)
            if i_new is None:
                raise NotSimple(f"edge pivot reached unknown vertex basis {J_new}")
            if i < i_new:
                edges.append((i, j_star))
    return edges


def _build_E(F, V, actives, e_mode, edge_pairs=None):
    f, n = F.shape[0], F.shape[1]
    rows_idx, cols_idx, data = [], [], []
    row_count = 0

    def emit(i, j):
        nonlocal row_count
        J = list(actives[i])
        coef = F[j] @ V[i][:, J]
        rows_idx.extend([row_count] * (n + 1))
        cols_idx.extend(J + [j])
        data.extend(list(coef) + [-1.0])
        row_count += 1

    if e_mode == "full":
        for i in range(len(V)):
            Jset = set(actives[i])
            for j in range(f):
                if j not in Jset:
                    emit(i, j)
    elif e_mode == "reduced":
        for i, j in edge_pairs:
            emit(i, j)
        alive = set()
        for J in actives:
            alive.update(J)
        for j in sorted(set(range(f)) - alive):
            for i in range(len(V)):
                emit(i, j)
    else:
        raise ValueError(f"unknown e_mode {e_mode!r}")
    E = sparse.coo_matrix((data, (rows_idx, cols_idx)),
                          shape=(row_count, f)).tocsr()
    return E


def build_polytope_triplet(F, z_bar, e_mode: str = "full") -> PolytopeTriplet:
    """Configuration triplet of a bounded simple polytope."""
    poly = HPolyhedron(F, z_bar)
    verts = enumerate_vertices(poly)
    if not verts:
        raise EmptyPolyhedron("template polytope is empty")
    n = poly.dim
    if any(len(v.active_set) != n for v in verts):
        raise NotSimple("template polytope is not simple")
    points = [v.point for v in verts]
    actives = [v.active_set for v in verts]
    V = _vertex_matrices(poly.F, actives)
    amap = {J: i for i, J in enumerate(actives)}
    edge_pairs = None
    if e_mode == "reduced":
        edge_pairs = _edges_of(poly.F, poly.z, points, actives, amap, None)
    E = _build_E(poly.F, V, actives, e_mode, edge_pairs)
    return PolytopeTriplet(F=poly.F, z_bar=poly.z, E=E, V=V, active_sets=actives)


def _check_assumption_structure(F, kind):
    f, n = F.shape
    last = F[:, -1]
    f1 = 0
    while f1 < f and abs(last[f1]) <= 1e-10:
        f1 += 1
    if f1 == 0:
        raise AssumptionViolated("no domain rows: first facet already has h != 0")
    f2 = f - f1
    if f2 < 1:
        raise AssumptionViolated("at least one lower facet (h < 0) is required")
    for i in range(f1, f):
        if last[i] > -1e-10:
            raise AssumptionViolated(
                f"row {i}: h must be strictly negative after the domain block"
            )
    if kind == "robust":
        e_n = np.zeros(n)
        e_n[-1] = -1.0
        if np.max(np.abs(F[-1] - e_n)) > 1e-9:
            raise AssumptionViolated(
                "robust templates need the last facet row equal to -e_n"
            )
    return f1, f2


def _check_domain_bounded(G1, n_x):
    box = [(-1.0, 1.0)] * n_x
    for i in range(n_x):
        for sgn in (1.0, -1.0):
            c = np.zeros(n_x)
            c[i] = -sgn
            res = linprog(c, A_ub=G1, b_ub=np.zeros(G1.shape[0]),
                          bounds=box, method="highs")
            if res.status == 0 and -res.fun > 1e-8:
                raise AssumptionViolated(
                    "domain rows G1 do not force G1 x <= 0 => x = 0"
                )


def build_triplet(F, z_bar, kind: str = "nominal", e_mode: str = "full",
                  recession_cap=None) -> ConfigurationTriplet:
    """Epigraph configuration triplet from a simple template P(z_bar).

    The vertex matrices scatter the inverse active-set blocks of F, the edge
    matrix follows the selected mode, and vertices are numbered so that the
    lowest vertex is first (nominal) or flat-facet vertices come last
    (robust).
    """
    if kind not in ("nominal", "robust"):
        raise ValueError(f"unknown kind {kind!r}")
    F = np.atleast_2d(np.asarray(F, dtype=float))
    poly = HPolyhedron(F, z_bar)
    Fn, zn = poly.F.copy(), poly.z.copy()
    f1, f2 = _check_assumption_structure(Fn, kind)
    # snap the structural zeros / unit entries exactly
    Fn[:f1, -1] = 0.0
    norms = np.linalg.norm(Fn, axis=1)
    Fn /= norms[:, None]
    zn /= norms
    if kind == "robust":
        Fn[-1] = 0.0
        Fn[-1, -1] = -1.0
    n = Fn.shape[1]
    _check_domain_bounded(Fn[:f1, :-1], n - 1)

    cap = (float(recession_cap) if recession_cap is not None
           else geometry.epigraph_cap(HPolyhedron(Fn, zn)))
    capped = HPolyhedron(np.vstack([Fn, np.eye(n)[-1]]),
                         np.concatenate([zn, [cap]]))
    cap_idx = Fn.shape[0]
    verts = enumerate_vertices(capped)
    true_verts = [v for v in verts if cap_idx not in v.active_set]
    if not true_verts:
        raise EmptyPolyhedron("template epigraph has no vertices")
    if any(len(v.active_set) != n for v in verts):
        raise NotSimple("template epigraph is not simple (perturb first)")

    points = [v.point for v in true_verts]
    actives = [v.active_set for v in true_verts]

    order = list(range(len(points)))
    if kind == "nominal":
        ys = np.array([p[-1] for p in points])
        imin = int(np.argmin(ys))
        rest = np.delete(ys, imin)
        if rest.size and np.min(rest) - ys[imin] <= 1e-9:
            raise AssumptionViolated(
                "lowest vertex of the template is not unique; perturb the template"
            )
        order = [imin] + [i for i in order if i != imin]
    else:
        flat_idx = Fn.shape[0] - 1
        on_flat = [i for i in order if flat_idx in actives[i]]
        off_flat = [i for i in order if flat_idx not in actives[i]]
        if not on_flat:
            raise AssumptionViolated(
                "flat facet touches no vertex at the template parameter"
            )
        order = off_flat + on_flat
    points = [points[i] for i in order]
    actives = [actives[i] for i in order]

    V = _vertex_matrices(Fn, actives)
    for Vi, p in zip(V, points):
        if np.max(np.abs(Vi @ zn - p)) > 1e-8:
            raise NotSimple("vertex matrix inconsistent with enumerated vertex")

    edge_pairs = None
    if e_mode == "reduced":
        # adjacency is computed on the capped polytope; remap to the final order
        cmap = {v.active_set: k for k, v in enumerate(verts)}
        tmap = {J: new_i for new_i, J in enumerate(actives)}
        cap_points = [v.point for v in verts]
        cap_actives = [v.active_set for v in verts]
        raw = _edges_of(capped.F, capped.z, cap_points, cap_actives, cmap, cap_idx)
        edge_pairs = sorted({(tmap[cap_actives[ci]], j) for ci, j in raw
                             if cap_idx not in cap_actives[ci]})
    E = _build_E(Fn, V, actives, e_mode, edge_pairs)

    return ConfigurationTriplet(F=Fn, z_bar=zn, E=E, V=V, f1=f1, f2=f2,
                                kind=kind, active_sets=actives, e_mode=e_mode)


# ---------------------------------------------------------------------------
# template strategies
# ---------------------------------------------------------------------------

def _unit_rows(rng, count, dim):
    rows = []
    while len(rows) < count:
        g = rng.standard_normal(dim)
        norm = np.linalg.norm(g)
        if norm < 1e-9:
            continue
        rows.append(g / norm)
    return np.array(rows)


def make_template_s1(f1: int, f2: int, seed: int, kind: str = "nominal",
                     n_x: int = 2, min_slope: float = 0.05,
                     max_attempts: int = 40):
    """Random hemisphere template: f1 equator rows, f2 interior rows, z_bar = 1.

    Equator rows have an exact zero last coordinate; interior rows are unit
    vectors with last coordinate at most -min_slope (resampled otherwise, a
    numerical floor on facet steepness). Robust templates reserve the last
    row for -e_n. Resamples until the capped template is simple.
    """
    n = n_x + 1
    if f1 < n_x + 1:
        raise ValueError(f"f1 must be at least n_x + 1 = {n_x + 1}")
    n_random_lower = f2 - 1 if kind == "robust" else f2
    if n_random_lower < 0 or f2 < 1:
        raise ValueError("f2 must be at least 1 (robust: the flat row counts)")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        eq = _unit_rows(rng, f1, n_x)
        G1 = np.hstack([eq, np.zeros((f1, 1))])
        lower = []
        while len(lower) < n_random_lower:
            c = rng.standard_normal(n)
            norm = np.linalg.norm(c)
            if norm < 1e-9:
                continue
            c = c / norm
            c[-1] = -abs(c[-1])
            if c[-1] > -min_slope:
                continue
            c = c / np.linalg.norm(c)
            lower.append(c)
        rows = [G1] + ([np.array(lower)] if lower else [])
        if kind == "robust":
            flat = np.zeros((1, n))
            flat[0, -1] = -1.0
            rows.append(flat)
        F = np.vstack(rows)
        z_bar = np.ones(F.shape[0])
        try:
            _check_domain_bounded(G1[:, :-1], n_x)
            build_triplet(F, z_bar, kind=kind)
        except (AssumptionViolated, NotSimple, EmptyPolyhedron):
            continue
        return F, z_bar
    raise PerturbationFailed(
        f"no simple random template found in {max_attempts} attempts"
    )


def make_template_s2(F, system, cost, Mbar, N: int, unc=None, **minmax_kwargs):
    """Template parameter from the finite-horizon facet bounds: z_bar = zeta^N."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if unc is None:
        zeta = _bounds.zeta_nominal(F, system, cost, Mbar, N)
    else:
        zeta = _bounds.zeta_minmax(F, system, unc, cost, Mbar, N, **minmax_kwargs)
    if geometry.find_interior_point(HPolyhedron(F, zeta)) is None:
        raise Infeasible("P(zeta^N) is empty; horizon bounds are inconsistent")
    return F, zeta


def _lower_hull_1d(pts):
    order = np.argsort(pts[:, 0])
    P = pts[order]
    hull = []
    for p in P:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            if cross <= 1e-14:
                hull.pop()
            else:
                break
        hull.append(p)
    rows, offs = [], []
    for a, b in zip(hull[:-1], hull[1:]):
        d = b - a
        nrm = np.array([d[1], -d[0]])
        nrm /= np.linalg.norm(nrm)
        if nrm[1] > 0:
            nrm = -nrm
        rows.append(nrm)
        offs.append(float(nrm @ a))
    return np.array(rows), np.array(offs)


def make_template_s3(domain: HPolyhedron, samples, system, cost, Mbar, N: int):
    """Epigraph template interpolating finite-horizon costs at sample states.

    Evaluates the N-step cost-to-go (with terminal underestimator Mbar) at
    each sample, takes the lower convex hull of the graph points, and uses
    its downward facets as the sloped rows; the domain rows are passed
    through. The result is typically degenerate at interior samples and
    should be perturbed to a simple parameter before triplet construction.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n_x = domain.dim
    if samples.shape[1] != n_x:
        raise ValueError("sample dimension does not match the domain")
    if samples.shape[0] < n_x + 1:
        raise DegenerateHull("need at least n_x + 1 samples for an interpolant")
    for xk in samples:
        if not domain.contains(xk, tol=1e-7):
            raise ValueError(f"sample {xk} lies outside the domain polytope")
    values = np.array([
        _bounds.finite_horizon_cost(system, cost, Mbar, N, xk, state_set=domain)
        for xk in samples
    ])
    pts = np.hstack([samples, values[:, None]])
    if n_x == 1:
        rows, offs = _lower_hull_1d(pts)
        if rows.shape[0] < 1:
            raise DegenerateHull("samples are affinely dependent")
    else:
        try:
            hull = ConvexHull(pts)
        except QhullError as exc:
            raise DegenerateHull(f"sample graph points are degenerate: {exc}") from exc
        eqs = hull.equations
        lower = eqs[eqs[:, -2] < -1e-9]
        if lower.shape[0] == 0:
            raise DegenerateHull("no downward facets in the sample hull")
        uniq = np.unique(np.round(lower, 9), axis=0)
        rows = uniq[:, :-1]
        offs = -uniq[:, -1]
    G1 = np.hstack([domain.F, np.zeros((domain.n_rows, 1))])
    F = np.vstack([G1, rows])
    z_bar = np.concatenate([domain.z, offs])
    return F, z_bar


def max_ci_domain(G1, system, lam: float, z_init=None) -> HPolyhedron:
    """Largest contractive domain polytope in a fixed facet template.

    Solves one LP over the domain facet parameter: every vertex must admit
    an input mapping it into the lam-scaled domain while respecting the
    state and input constraints. Size is measured by the facet parameter sum.
    """
    G1 = np.atleast_2d(np.asarray(G1, dtype=float))
    if G1.shape[1] == system.n_x + 1:
        G1 = G1[:, :-1]
    if z_init is None:
        z_init = np.ones(G1.shape[0])
    dom = build_polytope_triplet(G1, z_init)
    from .conic import ConvexProgram  # local import keeps module load light

    p = ConvexProgram()
    z1 = p.add_variable("z1", dom.f)
    u = p.add_variable("u", dom.v * system.n_u)
    n_u = system.n_u
    p.add_leq(dom.E @ z1)
    for i, Vi in enumerate(dom.V):
        ui = u[i * n_u:(i + 1) * n_u]
        p.add_leq((G1 @ system.A @ Vi) @ z1 + (G1 @ system.B) @ ui - lam * z1.as_aff())
        p.add_leq((system.X.F @ Vi) @ z1 - system.X.z)
        p.add_leq(system.U.F @ ui - system.U.z)
    p.minimize((-np.ones((1, dom.f))) @ z1)
    sol = p.solve()
    if sol.status != "optimal":
        raise Infeasible(f"contractive domain LP was {sol.status}")
    return HPolyhedron(G1, sol.values["z1"])


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _sample_feasible_z(t: ConfigurationTriplet, rng, z_bar, radius):
    for _ in range(40):
        z = z_bar + rng.uniform(-radius, radius, size=z_bar.size)
        if t.kind == "robust":
            pass  # validation does not pin z_f; the synthesis does
        if np.max(t.E @ z) <= 0.0:
            return z
        radius *= 0.5
    return z_bar.copy()


def validate_triplet(t: ConfigurationTriplet, trials: int, seed: int = 0,
                     z_bar=None, points_per_trial: int = 4) -> ValidationReport:
    """Numerical check of the configuration equivalence on random feasible z.

    For each trial parameter: (a) every vertex satisfies every facet row;
    (b) random members of P(z) decompose over the vertex hull plus the
    vertical ray; (c) nominal templates have a unique lowest vertex (ties
    are flagged, not failed).
    """
    report = ValidationReport(trials=trials)
    if trials <= 0:
        return report
    z_bar = t.z_bar if z_bar is None else np.asarray(z_bar, dtype=float)
    rng = np.random.default_rng(seed)
    slacks = -np.asarray((t.E @ z_bar)).reshape(-1)
    base_radius = max(1e-6, 0.3 * float(np.min(slacks)) /
                      max(1.0, float(np.max(np.abs(t.E).sum(axis=1)))))
    scale = float(np.max(np.abs(z_bar))) + 1.0
    for trial in range(trials):
        # escalate the search radius so late trials probe the feasibility
        # boundary of E (adversarial against missing rows)
        radius = min(base_radius * (1.0 + 0.5 * trial), 2.0 * scale)
        z = _sample_feasible_z(t, rng, z_bar, radius)
        pts = t.vertex_points(z)
        resid = pts @ t.F.T - z
        worst = float(np.max(resid))
        if worst > 1e-8:
            report.failures.append(
                f"trial {trial}: vertex violates a facet row by {worst:.2e}"
            )
            continue
        # (b) H-rep members must decompose over the vertex representation
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        hi[-1] += 1.0
        found = 0
        attempts = 0
        while found < points_per_trial and attempts < 60 * points_per_trial:
            attempts += 1
            cand = lo + rng.uniform(0.0, 1.0, size=t.n) * (hi - lo)
            if np.max(t.F @ cand - z) > 0.0:
                continue
            found += 1
            report.points_checked += 1
            if not _in_vertex_hull(cand, pts):
                report.failures.append(
                    f"trial {trial}: member {np.round(cand, 6)} not in "
                    "conv(vertices) + vertical ray"
                )
        if t.kind == "nominal":
            ys = pts[:, -1]
            imin = int(np.argmin(ys))
            if imin != 0:
                gap = ys[0] - ys[imin]
                if gap > 1e-10:
                    report.failures.append(
                        f"trial {trial}: vertex {imin} is lower than vertex 1 "
                        f"by {gap:.2e}"
                    )
                else:
                    report.ties_flagged += 1
            else:
                others = np.delete(ys, 0)
                if others.size and float(np.min(others) - ys[0]) <= 1e-10:
                    report.ties_flagged += 1
    return report


def _in_vertex_hull(point, gens, tol=1e-7):
    k, n = gens.shape
    A_eq = np.zeros((n + 1, k + 1))
    A_eq[:n, :k] = gens.T
    A_eq[n - 1, k] = 1.0
    A_eq[n, :k] = 1.0
    b_eq = np.concatenate([point, [1.0]])
    res = linprog(np.zeros(k + 1), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * (k + 1), method="highs")
    if res.status != 0:
        return False
    return float(np.max(np.abs(A_eq @ res.x - b_eq))) <= tol
