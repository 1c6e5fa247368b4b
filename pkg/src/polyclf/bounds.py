"""Horizon bounds and reference solutions.

Provides the quadratic cost of the unconstrained infinite-horizon regulator
(a convex under-estimator of the constrained value function), the per-facet
finite-horizon bounds zeta^N for nominal and min-max problems, and a grid
value-iteration reference used by the acceptance tests.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .conic import ConvexProgram, vstack_affs
from .errors import Infeasible, NotStabilizable, TreeTooLarge
from .geometry import HPolyhedron, enumerate_vertices
from .model import QuadraticCost, SetDistanceCost, _psd_sqrt


@dataclass
class QuadForm:
    """x -> x' P x with P symmetric PSD."""

    P: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        P = 0.5 * (P + P.T)
        if np.min(np.linalg.eigvalsh(P)) < -1e-10:
            raise ValueError("quadratic form must be PSD")
        self.P = P
        self.sqrt = _psd_sqrt(P)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(x @ self.P @ x)


def lqr_underestimator(sys, cost: QuadraticCost, step_tol: float = 1e-12,
                       max_iter: int = 100000) -> QuadForm:
    """Fixed-point iteration for the discrete-time Riccati equation."""
    A, B = sys.A, sys.B
    Q, R = cost.Q, cost.R
    P = Q.copy()
    for _ in range(max_iter):
        S = R + B.T @ P @ B
        K = np.linalg.solve(S, B.T @ P @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ K
        step = float(np.max(np.abs(P_next - P)))
        P = 0.5 * (P_next + P_next.T)
        if not np.isfinite(step) or np.max(np.abs(P)) > 1e14:
            raise NotStabilizable("Riccati iteration diverged")
        if step <= step_tol:
            return QuadForm(P)
    raise NotStabilizable(f"Riccati iteration did not converge in {max_iter} steps")


def riccati_residual(sys, cost: QuadraticCost, P) -> float:
    """Self-consistency residual ||P - riccati_update(P)||_inf."""
    A, B = sys.A, sys.B
    S = cost.R + B.T @ P @ B
    K = np.linalg.solve(S, B.T @ P @ A)
    P_next = cost.Q + A.T @ P @ A - A.T @ P @ B @ K
    return float(np.max(np.abs(P_next - P)))


# ---------------------------------------------------------------------------
# finite-horizon programs
# ---------------------------------------------------------------------------

def _add_stage_cost_epigraph(p, cost, x_aff, u_aff, t_var, tag):
    """t >= L(x, u) as a quadratic-cone row (with target auxiliaries if needed)."""
    if isinstance(cost, QuadraticCost):
        arg = vstack_affs([cost.Q_sqrt @ x_aff, cost.R_sqrt @ u_aff])
        p.add_quad_leq(arg, t_var)
    elif isinstance(cost, SetDistanceCost):
        xi = p.add_variable(f"xi_{tag}", cost.target.dim)
        p.add_leq(cost.target.F @ xi - cost.target.z)
        arg = vstack_affs([
            cost.Q_sqrt @ (x_aff - xi.as_aff()),
            cost.R_sqrt @ (u_aff - cost.K @ x_aff),
        ])
        p.add_quad_leq(arg, t_var)
    else:
        raise TypeError(f"unsupported cost type {type(cost).__name__}")


def finite_horizon_cost(sys, cost, Mbar, N: int, x0, state_set=None) -> float:
    """J_N(x0): N-step cost-to-go with terminal underestimator Mbar."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    X = sys.X if state_set is None else state_set
    n_x, n_u = sys.n_x, sys.n_u
    p = ConvexProgram()
    xs = p.add_variable("x", (N + 1) * n_x)
    if N > 0:
        us = p.add_variable("u", N * n_u)
    ts = p.add_variable("t", N + 1)
    p.add_eq(xs[0:n_x] - x0)
    for k in range(N):
        xk = xs[k * n_x:(k + 1) * n_x]
        xk1 = xs[(k + 1) * n_x:(k + 2) * n_x]
        uk = us[k * n_u:(k + 1) * n_u]
        p.add_eq(xk1 - sys.A @ xk - sys.B @ uk)
        p.add_leq(X.F @ xk - X.z)
        p.add_leq(sys.U.F @ uk - sys.U.z)
        _add_stage_cost_epigraph(p, cost, xk, uk, ts[k:k + 1], f"s{k}")
    xN = xs[N * n_x:(N + 1) * n_x]
    p.add_leq(X.F @ xN - X.z)
    if Mbar is not None:
        p.add_quad_leq(Mbar.sqrt @ xN, ts[N:N + 1])
    else:
        p.add_leq(-ts[N:N + 1])
    p.minimize(np.ones((1, N + 1)) @ ts)
    sol = p.solve()
    if sol.status != "optimal":
        raise Infeasible(f"horizon problem from {x0} is {sol.status}")
    return float(sol.objective)


def zeta_nominal(F, sys, cost, Mbar, N: int) -> np.ndarray:
    """Per-facet bounds: maximize G_i x0 + h_i (sum of stage costs + Mbar(x_N)).

    Each row is an independent convex program because h_i <= 0 turns the
    maximization into minimizing a nonnegative convex total.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n = F.shape[1]
    n_x, n_u = sys.n_x, sys.n_u
    if n != n_x + 1:
        raise ValueError("facet matrix must act on (x, y) space")
    zeta = np.zeros(F.shape[0])
    for i, row in enumerate(F):
        G_i = row[:n_x]
        h_i = float(row[n_x])
        if h_i > 1e-12:
            raise ValueError(f"row {i} has positive h; bounds need h <= 0")
        p = ConvexProgram()
        xs = p.add_variable("x", (N + 1) * n_x)
        us = p.add_variable("u", N * n_u) if N > 0 else None
        with_cost = h_i < -1e-12
        ts = p.add_variable("t", N + 1) if with_cost else None
        for k in range(N):
            xk = xs[k * n_x:(k + 1) * n_x]
            xk1 = xs[(k + 1) * n_x:(k + 2) * n_x]
            uk = us[k * n_u:(k + 1) * n_u]
            p.add_eq(xk1 - sys.A @ xk - sys.B @ uk)
            p.add_leq(sys.X.F @ xk - sys.X.z)
            p.add_leq(sys.U.F @ uk - sys.U.z)
            if with_cost:
                _add_stage_cost_epigraph(p, cost, xk, uk, ts[k:k + 1], f"s{k}")
        xN = xs[N * n_x:(N + 1) * n_x]
        p.add_leq(sys.X.F @ xN - sys.X.z)
        obj = (-G_i.reshape(1, -1)) @ xs[0:n_x]
        if with_cost:
            if Mbar is not None:
                p.add_quad_leq(Mbar.sqrt @ xN, ts[N:N + 1])
            else:
                p.add_leq(-ts[N:N + 1])
            obj = obj + (-h_i) * (np.ones((1, N + 1)) @ ts)
        p.minimize(obj)
        sol = p.solve()
        if sol.status != "optimal":
            raise Infeasible(f"zeta row {i} solve was {sol.status}")
        zeta[i] = -float(sol.objective)
    return zeta


def _scenario_branches(unc):
    Wv = unc.w_vertices()
    out = []
    for A_l, B_l in unc.AB_vertices:
        for w in Wv:
            out.append((A_l, B_l, w))
    return out


def zeta_minmax(F, sys, unc, cost, Mbar, N: int, n_max: int = 4,
                node_cap: int = 100000) -> np.ndarray:
    """Min-max per-facet bounds over the vertex scenario tree.

    Controls are shared by uncertainty history (one input per internal tree
    node), the inner minimum over scenarios is handled with an epigraph
    variable per leaf, and each facet row is solved independently.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n_x, n_u = sys.n_x, sys.n_u
    branches = _scenario_branches(unc)
    b = len(branches)
    if N > n_max:
        raise TreeTooLarge(f"horizon {N} exceeds n_max={n_max}")
    n_nodes = (b ** (N + 1) - 1) // (b - 1) if b > 1 else N + 1
    if n_nodes > node_cap:
        raise TreeTooLarge(f"{n_nodes} scenario nodes exceed the cap {node_cap}")

    # breadth-first node table: (depth, parent, branch)
    nodes = [(0, -1, -1)]
    level = [0]
    for depth in range(N):
        nxt = []
        for parent in level:
            for br in range(b):
                nodes.append((depth + 1, parent, br))
                nxt.append(len(nodes) - 1)
        level = nxt
    leaves = [i for i, (d, _, _) in enumerate(nodes) if d == N]
    internal = [i for i, (d, _, _) in enumerate(nodes) if d < N]

    def path(leaf):
        out = []
        node = leaf
        while node != -1:
            out.append(node)
            node = nodes[node][1]
        return out[::-1]

    zeta = np.zeros(F.shape[0])
    for i, row in enumerate(F):
        G_i = row[:n_x]
        h_i = float(row[n_x])
        if h_i > 1e-12:
            raise ValueError(f"row {i} has positive h; bounds need h <= 0")
        with_cost = h_i < -1e-12
        p = ConvexProgram()
        xs = p.add_variable("x", len(nodes) * n_x)
        us = p.add_variable("u", len(internal) * n_u) if internal else None
        uidx = {nid: k for k, nid in enumerate(internal)}
        if with_cost:
            ss = p.add_variable("s", len(internal)) if internal else None
            sN = p.add_variable("sN", len(leaves))
            tv = p.add_variable("tmin", 1)

        def xa(nid):
            return xs[nid * n_x:(nid + 1) * n_x]

        def ua(nid):
            k = uidx[nid]
            return us[k * n_u:(k + 1) * n_u]

        for nid, (depth, parent, br) in enumerate(nodes):
            p.add_leq(sys.X.F @ xa(nid) - sys.X.z)
            if parent >= 0:
                A_l, B_l, w = branches[br]
                p.add_eq(xa(nid) - A_l @ xa(parent) - B_l @ ua(parent) - w)
        for nid in internal:
            p.add_leq(sys.U.F @ ua(nid) - sys.U.z)
            if with_cost:
                _add_stage_cost_epigraph(p, cost, xa(nid), ua(nid),
                                         ss[uidx[nid]:uidx[nid] + 1], f"n{nid}")
        if with_cost:
            for li, leaf in enumerate(leaves):
                if Mbar is not None:
                    p.add_quad_leq(Mbar.sqrt @ xa(leaf), sN[li:li + 1])
                else:
                    p.add_leq(-sN[li:li + 1])
                # t <= G_i x0 + h_i (path stage costs + terminal)
                stage_sum = None
                for nid in path(leaf)[:-1]:
                    term = ss[uidx[nid]:uidx[nid] + 1]
                    stage_sum = term if stage_sum is None else stage_sum + term
                total = sN[li:li + 1] if stage_sum is None else stage_sum + sN[li:li + 1]
                p.add_leq(tv.as_aff() - G_i.reshape(1, -1) @ xa(0)
                          + (-h_i) * total)
            p.minimize(-1.0 * tv.as_aff())
        else:
            p.minimize((-G_i.reshape(1, -1)) @ xa(0))
        sol = p.solve()
        if sol.status != "optimal":
            raise Infeasible(f"min-max zeta row {i} solve was {sol.status}")
        zeta[i] = -float(sol.objective)
    return zeta


# ---------------------------------------------------------------------------
# grid value iteration
# ---------------------------------------------------------------------------

@dataclass
class GridFunction:
    """Values on a rectangular grid; infinite outside its finite domain."""

    axes: list
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return _interp_inf(self.axes, self.values, pts)

    def grid_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @property
    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    def max_finite(self) -> float:
        vals = self.values[self.finite_mask]
        return float(np.max(vals)) if vals.size else float("nan")

    def cell_diagonal(self) -> float:
        steps = [ax[1] - ax[0] for ax in self.axes if ax.size > 1]
        return float(np.linalg.norm(steps))

    def to_csv(self, path):
        pts = self.grid_points()
        vals = self.values.ravel()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(pts.shape[1])] + ["value"])
            for p, v in zip(pts, vals):
                w.writerow(list(p) + [v if np.isfinite(v) else "inf"])


def _interp_inf(axes, values, pts):
    """Multilinear interpolation that propagates infinities conservatively."""
    n = len(axes)
    idx = []
    frac = []
    inside = np.ones(pts.shape[0], dtype=bool)
    for d in range(n):
        ax = axes[d]
        x = pts[:, d]
        inside &= (x >= ax[0] - 1e-12) & (x <= ax[-1] + 1e-12)
        t = (x - ax[0]) / (ax[-1] - ax[0]) * (ax.size - 1)
        i0 = np.clip(np.floor(t).astype(int), 0, ax.size - 2)
        idx.append(i0)
        frac.append(np.clip(t - i0, 0.0, 1.0))
    out = np.zeros(pts.shape[0])
    corner_any_inf = np.zeros(pts.shape[0], dtype=bool)
    for corner in range(2 ** n):
        weight = np.ones(pts.shape[0])
        flat = np.zeros(pts.shape[0], dtype=int)
        stride = 1
        for d in reversed(range(n)):
            bit = (corner >> d) & 1
            weight = weight * (frac[d] if bit else 1.0 - frac[d])
            flat = flat + (idx[d] + bit) * stride
            stride *= axes[d].size
        # flat index built with last axis fastest; values uses C order
        vals = values.ravel()[flat]
        bad = ~np.isfinite(vals)
        corner_any_inf |= bad & (weight > 1e-12)
        out += np.where(bad, 0.0, vals) * weight
    out[corner_any_inf] = np.inf
    out[~inside] = np.inf
    return out


def _u_grid(U: HPolyhedron, res: int) -> np.ndarray:
    from .geometry import support as _support

    n_u = U.dim
    los = [-_support(U, -np.eye(n_u)[k]) for k in range(n_u)]
    his = [_support(U, np.eye(n_u)[k]) for k in range(n_u)]
    axes = [np.linspace(lo, hi, res) for lo, hi in zip(los, his)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts[U.contains_many(pts)]


class _Stencil:
    """Precomputed bilinear gather for one fixed next-state map."""

    __slots__ = ("flat", "w00", "w01", "w10", "w11", "valid", "res1")

    def __init__(self, axes, nxt):
        res0, res1 = axes[0].size, axes[1].size
        self.res1 = res1
        valid = np.ones(nxt.shape[0], dtype=bool)
        ij = []
        fr = []
        for d, ax in enumerate(axes):
            x = nxt[:, d]
            valid &= (x >= ax[0] - 1e-12) & (x <= ax[-1] + 1e-12)
            t = (x - ax[0]) / (ax[-1] - ax[0]) * (ax.size - 1)
            i0 = np.clip(np.floor(t).astype(np.int64), 0, ax.size - 2)
            ij.append(i0)
            fr.append(np.clip(t - i0, 0.0, 1.0))
        self.flat = ij[0] * res1 + ij[1]
        fx, fy = fr
        self.w00 = (1 - fx) * (1 - fy)
        self.w01 = (1 - fx) * fy
        self.w10 = fx * (1 - fy)
        self.w11 = fx * fy
        self.valid = valid

    def gather(self, Vflat):
        v00 = Vflat[self.flat]
        v01 = Vflat[self.flat + 1]
        v10 = Vflat[self.flat + self.res1]
        v11 = Vflat[self.flat + self.res1 + 1]
        with np.errstate(invalid="ignore"):
            out = (np.where(self.w00 > 1e-12, v00 * self.w00, 0.0)
                   + np.where(self.w01 > 1e-12, v01 * self.w01, 0.0)
                   + np.where(self.w10 > 1e-12, v10 * self.w10, 0.0)
                   + np.where(self.w11 > 1e-12, v11 * self.w11, 0.0))
        bad = ((self.w00 > 1e-12) & ~np.isfinite(v00)) \
            | ((self.w01 > 1e-12) & ~np.isfinite(v01)) \
            | ((self.w10 > 1e-12) & ~np.isfinite(v10)) \
            | ((self.w11 > 1e-12) & ~np.isfinite(v11))
        out[bad | ~self.valid] = np.inf
        return out


def value_iteration(sys, cost, domain: HPolyhedron, unc=None, grid_res: int = 301,
                    iters: int = 400, u_res: int = 61, tol: float = 1e-6,
                    prune_tol: float = 1e-3) -> GridFunction:
    """Bellman iteration on a rectangular grid over the domain polytope.

    Next states falling outside the domain grid (or onto infinite cells)
    contribute +inf, which makes the fixed point an inner approximation of
    the true domain of the value function. Iterates increase monotonically
    from zero. Cells still changing by more than prune_tol after the final
    sweep have no admissible way to stay inside the gridded domain at finite
    cost (their monotone limit is infinite) and are reported as +inf.
    """
    if sys.n_x != 2:
        raise ValueError("grid references are implemented for n_x = 2 only")
    dverts = enumerate_vertices(domain)
    if not dverts:
        raise Infeasible("value iteration domain is empty")
    P = np.array([v.point for v in dverts])
    lo, hi = P.min(axis=0), P.max(axis=0)
    axes = [np.linspace(lo[d], hi[d], grid_res) for d in range(2)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    inside = domain.contains_many(pts)

    V = np.where(inside, 0.0, np.inf)
    ugrid = _u_grid(sys.U, u_res)

    if unc is None:
        models = [(sys.A, sys.B, np.zeros(2))]
    else:
        models = _scenario_branches(unc)

    # stage cost on the grid, split into an x part and a per-u part
    if isinstance(cost, QuadraticCost):
        Lx = np.einsum("ij,jk,ik->i", pts, cost.Q, pts)

        def Lu(u):
            return float(u @ cost.R @ u)
    elif isinstance(cost, SetDistanceCost):
        Lx = _polytope_sqdist_grid(pts, cost)

        def Lu(u):
            du = u[None, :] - pts @ cost.K.T
            return np.einsum("ij,jk,ik->i", du, cost.R, du)
    else:
        raise TypeError(f"unsupported cost type {type(cost).__name__}")

    stencils = []
    for u in ugrid:
        per_model = [_Stencil(axes, pts @ A_l.T + (B_l @ u) + w)
                     for A_l, B_l, w in models]
        stencils.append((Lu(u), per_model))

    sup_change = np.inf
    it = 0
    monotone_ok = True
    last_change = np.zeros(pts.shape[0])
    for it in range(1, iters + 1):
        best = np.full(pts.shape[0], np.inf)
        for lu, per_model in stencils:
            worst = per_model[0].gather(V)
            for st in per_model[1:]:
                worst = np.maximum(worst, st.gather(V))
            np.minimum(best, worst + lu, out=best)
        best = best + Lx
        best[~inside] = np.inf
        both = np.isfinite(best) & np.isfinite(V)
        if np.any(best[both] < V[both] - 1e-9):
            monotone_ok = False
        with np.errstate(invalid="ignore"):
            last_change = np.where(both, np.abs(best - V), 0.0)
        sup_change = float(np.max(last_change)) if np.any(both) else 0.0
        newly_inf = np.isinf(best) & np.isfinite(V)
        V = best
        if sup_change <= tol and not np.any(newly_inf):
            break
    pruned = int(np.sum(np.isfinite(V) & (last_change > prune_tol)))
    if pruned:
        V = np.where(last_change > prune_tol, np.inf, V)
    meta = {"iterations": it, "sup_change": sup_change,
            "converged": sup_change <= tol, "monotone": monotone_ok,
            "grid_res": grid_res, "u_res": u_res, "pruned_cells": pruned,
            "finite_cells": int(np.isfinite(V).sum())}
    return GridFunction(axes=axes, values=V.reshape(grid_res, grid_res), meta=meta)


def _polytope_sqdist_grid(pts, cost: SetDistanceCost):
    """Exact squared Q-distance from grid points to the target polygon."""
    tv = enumerate_vertices(cost.target)
    if not tv:
        raise Infeasible("set-distance target is empty")
    VT = np.array([v.point for v in tv])
    S = cost.Q_sqrt
    Y = pts @ S.T
    W = VT @ S.T
    center = W.mean(axis=0)
    order = np.argsort(np.arctan2(W[:, 1] - center[1], W[:, 0] - center[0]))
    W = W[order]
    k = W.shape[0]
    inside = np.ones(pts.shape[0], dtype=bool)
    best = np.full(pts.shape[0], np.inf)
    for a_i in range(k):
        a = W[a_i]
        bpt = W[(a_i + 1) % k]
        d = bpt - a
        dd = float(d @ d)
        if dd < 1e-16:
            diff = Y - a
            best = np.minimum(best, np.einsum("ij,ij->i", diff, diff))
            continue
        t = np.clip((Y - a) @ d / dd, 0.0, 1.0)
        proj = a + t[:, None] * d
        diff = Y - proj
        best = np.minimum(best, np.einsum("ij,ij->i", diff, diff))
        cross = (Y[:, 0] - a[0]) * d[1] - (Y[:, 1] - a[1]) * d[0]
        inside &= cross <= 1e-12
    out = np.where(inside, 0.0, best)
    return out
