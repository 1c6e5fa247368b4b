"""Problem data: linear dynamics, constraint polytopes, stage costs, uncertainty.

The uncertainty model keeps multiplicative uncertainty as an explicit vertex
list for (A, B) and the additive disturbance set W as an H-rep polytope. W
enters the synthesis rows only through its per-row support values, which keeps
all robust counterpart constraints affine regardless of how W is represented.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .conic import ConvexProgram, vstack_affs
from .errors import Infeasible
from .geometry import HPolyhedron


def _psd_sqrt(Q, tol=1e-10):
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    Q = 0.5 * (Q + Q.T)
    w, U = np.linalg.eigh(Q)
    if np.min(w) < -tol:
        raise ValueError(f"matrix is not PSD (min eigenvalue {np.min(w):.3e})")
    w = np.clip(w, 0.0, None)
    return U @ np.diag(np.sqrt(w)) @ U.T


class LinearSystem:
    """x+ = A x + B u with polytopic state and input constraints."""

    def __init__(self, A, B, X: HPolyhedron, U: HPolyhedron):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.asarray(B, dtype=float)
        if self.B.ndim == 1:
            self.B = self.B.reshape(-1, 1)
        self.X = X
        self.U = U
        n_x, n_u = self.B.shape
        if self.A.shape != (n_x, n_x):
            raise ValueError("A must be square and compatible with B")
        if np.linalg.matrix_rank(self.B) != n_u or n_u > n_x:
            raise ValueError("B must have full column rank with n_u <= n_x")
        if X.dim != n_x or U.dim != n_u:
            raise ValueError("constraint sets have wrong dimensions")
        if not X.contains(np.zeros(n_x)) or not U.contains(np.zeros(n_u)):
            raise ValueError("origin must belong to both X and U")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    def to_json(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(),
                "X": self.X.to_json(), "U": self.U.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "LinearSystem":
        return cls(np.asarray(obj["A"]), np.asarray(obj["B"]),
                   HPolyhedron.from_json(obj["X"]), HPolyhedron.from_json(obj["U"]))


class UncertaintyModel:
    """Vertex list for (A, B) plus an additive disturbance polytope W."""

    def __init__(self, AB_vertices, W: HPolyhedron, W_vertices=None):
        self.AB_vertices = []
        for A, B in AB_vertices:
            A = np.atleast_2d(np.asarray(A, dtype=float))
            B = np.asarray(B, dtype=float)
            if B.ndim == 1:
                B = B.reshape(-1, 1)
            self.AB_vertices.append((A, B))
        if not self.AB_vertices:
            raise ValueError("at least one (A, B) vertex required")
        self.W = W
        # compactness: support must be finite in every coordinate direction
        n = W.dim
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            geometry.support(W, e)
            geometry.support(W, -e)
        self._W_vertices = None
        if W_vertices is not None:
            self._W_vertices = np.atleast_2d(np.asarray(W_vertices, dtype=float))

    @property
    def n_vertices(self) -> int:
        return len(self.AB_vertices)

    def w_support(self, direction) -> float:
        return geometry.support(self.W, direction)

    def w_supports(self, G) -> np.ndarray:
        G = np.atleast_2d(np.asarray(G, dtype=float))
        return np.array([self.w_support(row) if np.linalg.norm(row) > 1e-12 else 0.0
                         for row in G])

    def w_vertices(self) -> np.ndarray:
        """Vertices of W; brute-force enumeration tolerates flat polytopes."""
        if self._W_vertices is None:
            verts = geometry.enumerate_vertices(self.W, method="brute")
            if not verts:
                raise Infeasible("disturbance set W is empty")
            self._W_vertices = np.array([v.point for v in verts])
        return self._W_vertices

    def to_json(self) -> dict:
        out = {"AB_vertices": [[A.tolist(), B.tolist()] for A, B in self.AB_vertices],
               "W": self.W.to_json()}
        if self._W_vertices is not None:
            out["W_vertices"] = self._W_vertices.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "UncertaintyModel":
        return cls([(np.asarray(A), np.asarray(B)) for A, B in obj["AB_vertices"]],
                   HPolyhedron.from_json(obj["W"]),
                   W_vertices=obj.get("W_vertices"))


class QuadraticCost:
    """L(x, u) = x'Qx + u'Ru with Q PSD and R PD."""

    variant = "quadratic"

    def __init__(self, Q, R):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(R, dtype=float))
        self.Q_sqrt = _psd_sqrt(self.Q)
        if np.min(np.linalg.eigvalsh(0.5 * (self.R + self.R.T))) <= 0:
            raise ValueError("R must be positive definite")
        self.R_sqrt = _psd_sqrt(self.R)

    def eval(self, x, u) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        return float(x @ self.Q @ x + u @ self.R @ u)

    def to_json(self) -> dict:
        return {"variant": "quadratic", "Q": self.Q.tolist(), "R": self.R.tolist()}


class SetDistanceCost:
    """L(x, u) = min over xi in target of ||x - xi||_Q^2 + ||u - Kx||_R^2."""

    variant = "set_distance"

    def __init__(self, Q, R, K, target: HPolyhedron):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(R, dtype=float))
        self.K = np.atleast_2d(np.asarray(K, dtype=float))
        self.Q_sqrt = _psd_sqrt(self.Q)
        self.R_sqrt = _psd_sqrt(self.R)
        self.target = target
        if geometry.find_interior_point(target) is None:
            raise ValueError("set-distance target must be nonempty")
        self._proj_cache: dict[bytes, float] = {}

    def x_distance_sq(self, x) -> float:
        """min over xi in target of ||x - xi||_Q^2 (small conic program)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        key = x.tobytes()
        hit = self._proj_cache.get(key)
        if hit is not None:
            return hit
        if self.target.contains(x):
            val = 0.0
        else:
            p = ConvexProgram()
            xi = p.add_variable("xi", x.size)
            t = p.add_variable("t", 1)
            p.add_leq(self.target.F @ xi - self.target.z)
            p.add_quad_leq(self.Q_sqrt @ (x - xi.as_aff()), t)
            p.minimize(np.array([[1.0]]) @ t)
            sol = p.solve()
            if not sol.optimal:
                raise Infeasible(f"target projection failed: {sol.status}")
            val = max(float(sol.values["t"][0]), 0.0)
        if len(self._proj_cache) > 8192:
            self._proj_cache.clear()
        self._proj_cache[key] = val
        return val

    def eval(self, x, u) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        du = u - self.K @ x
        return self.x_distance_sq(x) + float(du @ self.R @ du)

    def to_json(self) -> dict:
        return {"variant": "set_distance", "Q": self.Q.tolist(), "R": self.R.tolist(),
                "K": self.K.tolist(), "target": self.target.to_json()}


def cost_from_json(obj: dict, target: HPolyhedron | None = None):
    if obj["variant"] == "quadratic":
        return QuadraticCost(np.asarray(obj["Q"]), np.asarray(obj["R"]))
    if obj["variant"] == "set_distance":
        tgt = target
        if tgt is None and obj.get("target") is not None:
            tgt = HPolyhedron.from_json(obj["target"])
        if tgt is None:
            raise ValueError("set_distance cost needs a target polytope")
        return SetDistanceCost(np.asarray(obj["Q"]), np.asarray(obj["R"]),
                               np.asarray(obj["K"]), tgt)
    raise ValueError(f"unknown cost variant {obj['variant']!r}")


def eval_stage_cost(cost, x, u) -> float:
    return cost.eval(x, u)


def robust_counterpart_rows(unc: UncertaintyModel, G_j, R_i):
    """Affine forms whose maximum realizes the worst-case facet row.

    Returns one (coef_z, coef_v, const) triple per (A, B) vertex, where the
    row reads coef_z . z + coef_v . v + const.
    """
    G_j = np.asarray(G_j, dtype=float).reshape(-1)
    R_i = np.atleast_2d(np.asarray(R_i, dtype=float))
    w_bar = unc.w_support(G_j) if np.linalg.norm(G_j) > 1e-12 else 0.0
    rows = []
    for A_l, B_l in unc.AB_vertices:
        rows.append(((G_j @ A_l) @ R_i, G_j @ B_l, w_bar))
    return rows


def compute_rci_target(dom_triplet, K, sys: LinearSystem, unc: UncertaintyModel,
                       objective=None) -> HPolyhedron:
    """Smallest robust control invariant polytope { x | G1 x <= zs } under u = Kx.

    One linear program over the facet parameter zs of the domain configuration
    triplet: every vertex image (A + BK) V_i zs, worst-cased over the
    disturbance supports and the (A, B) vertices, must stay inside the set,
    with K V_i zs admissible and V_i zs inside the state constraints.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    G1 = dom_triplet.F
    E1 = dom_triplet.E
    V1 = dom_triplet.V
    f1 = G1.shape[0]
    w_bar = unc.w_supports(G1)

    p = ConvexProgram()
    zs = p.add_variable("zs", f1)
    p.add_leq(E1 @ zs)
    for Vi in V1:
        for A_l, B_l in unc.AB_vertices:
            Acl = A_l + B_l @ K
            p.add_leq((G1 @ Acl @ Vi) @ zs - zs.as_aff() + w_bar)
        p.add_leq((sys.U.F @ K @ Vi) @ zs - sys.U.z)
        p.add_leq((sys.X.F @ Vi) @ zs - sys.X.z)
    if objective is None:
        objective = np.ones(f1)
    p.minimize(np.asarray(objective, dtype=float).reshape(1, -1) @ zs)
    sol = p.solve()
    if sol.status != "optimal":
        raise Infeasible(
            f"no robust invariant set in this template for the given gain ({sol.status})"
        )
    return HPolyhedron(G1, sol.values["zs"])
