"""Assembly and solution of the CLF synthesis programs.

The nominal program couples, for every epigraph vertex, a stage-cost
epigraph cone, domain contraction rows, lower-facet descent rows, and
membership rows, with the global configuration constraint E z <= 0 and the
positive-definiteness pin V_1 z = 0. The robust program replaces the row
families with their worst-case counterparts over the uncertainty vertices
and pins the flat facet z_f = 0 instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import pwa as _pwa
from .conic import Aff, ConvexProgram, matmul, vstack_affs
from .errors import Infeasible, ModeMismatch, SolverFailure
from .model import QuadraticCost, SetDistanceCost
from .template import ConfigurationTriplet


@dataclass
class LinearObjective:
    """sigma(z) = c . z with strictly negative weights on the free entries."""

    c: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)


@dataclass
class InfDistanceObjective:
    """sigma(z) = || diag(weights) (z - zeta) ||_inf."""

    weights: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.zeta = np.asarray(self.zeta, dtype=float).reshape(-1)


@dataclass
class SynthesisSpec:
    triplet: ConfigurationTriplet
    system: object
    cost: object
    lam: float = 0.995
    uncertainty: object = None
    target_zs: np.ndarray = None
    objective: object = None
    freeze_z1: np.ndarray = None

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.freeze_z1 is not None:
            self.freeze_z1 = np.asarray(self.freeze_z1, dtype=float).reshape(-1)
            if self.freeze_z1.size != self.triplet.f1:
                raise ValueError("freeze_z1 must have length f1")
        if self.target_zs is not None:
            self.target_zs = np.asarray(self.target_zs, dtype=float).reshape(-1)

    @property
    def robust_mode(self) -> bool:
        return self.uncertainty is not None and self.target_zs is not None


@dataclass
class SynthesisResult:
    z: np.ndarray
    v: np.ndarray                 # one input row per epigraph vertex
    y: np.ndarray
    status: str
    objective_value: float
    kind: str
    lam: float
    diagnostics: dict = field(default_factory=dict)
    xi: np.ndarray = None         # set-distance auxiliaries, when present
    sizes: dict = field(default_factory=dict)
    target_zs: np.ndarray = None

    def to_json(self, triplet: ConfigurationTriplet) -> dict:
        meta = {"solver": self.diagnostics.get("solver", ""),
                "iterations": self.diagnostics.get("iterations", 0),
                "residuals": {k: v for k, v in self.diagnostics.items()
                              if isinstance(v, float)},
                "sizes": self.sizes,
                "objective": self.objective_value}
        out = {"triplet": triplet.to_json(), "z": self.z.tolist(),
               "v": self.v.tolist(), "y": self.y.tolist(),
               "lambda": self.lam, "kind": self.kind, "status": self.status,
               "meta": meta}
        if self.target_zs is not None:
            out["target_zs"] = self.target_zs.tolist()
        return out


# ---------------------------------------------------------------------------
# sparse row-family assembly
# ---------------------------------------------------------------------------

class _FamilyBuilder:
    """Accumulates COO blocks for one inequality family over all vertices."""

    def __init__(self, f, n_v_inputs, n_y):
        self.f = f
        self.nv = n_v_inputs
        self.ny = n_y
        self.zr, self.zc, self.zd = [], [], []
        self.vr, self.vc, self.vd = [], [], []
        self.yr, self.yc, self.yd = [], [], []
        self.const = []
        self.rows = 0

    def block(self, z_cols=None, z_block=None, z_diag_cols=None, z_diag=None,
              v_cols=None, v_block=None, y_col=None, y_coefs=None, const=None):
        k = const.size
        r0 = self.rows
        if z_block is not None:
            J = np.asarray(z_cols)
            self.zr.append(np.repeat(np.arange(r0, r0 + k), J.size))
            self.zc.append(np.tile(J, k))
            self.zd.append(np.asarray(z_block, dtype=float).ravel())
        if z_diag is not None:
            cols = np.asarray(z_diag_cols)
            self.zr.append(np.arange(r0, r0 + k))
            self.zc.append(cols)
            self.zd.append(np.asarray(z_diag, dtype=float))
        if v_block is not None:
            cols = np.asarray(v_cols)
            self.vr.append(np.repeat(np.arange(r0, r0 + k), cols.size))
            self.vc.append(np.tile(cols, k))
            self.vd.append(np.asarray(v_block, dtype=float).ravel())
        if y_coefs is not None:
            self.yr.append(np.arange(r0, r0 + k))
            self.yc.append(np.full(k, y_col))
            self.yd.append(np.asarray(y_coefs, dtype=float))
        self.const.append(np.asarray(const, dtype=float))
        self.rows += k

    def _coo(self, r, c, d, width):
        if not r:
            return sparse.csr_matrix((self.rows, width))
        return sparse.coo_matrix(
            (np.concatenate(d), (np.concatenate(r), np.concatenate(c))),
            shape=(self.rows, width)).tocsr()

    def emit(self, prog, z, v, y):
        if self.rows == 0:
            return
        terms = {z.name: self._coo(self.zr, self.zc, self.zd, self.f)}
        if self.vd:
            terms[v.name] = self._coo(self.vr, self.vc, self.vd, self.nv)
        if self.yd:
            terms[y.name] = self._coo(self.yr, self.yc, self.yd, self.ny)
        prog.add_leq(Aff(terms, np.concatenate(self.const), self.rows))


def _vertex_cost_cone(p, spec, i, z, v, y, xi=None):
    t = spec.triplet
    cost = spec.cost
    n_x, n_u = t.n_x, spec.system.n_u
    J = list(t.active_sets[i])
    Ri = t.R(i)
    si = t.s(i)
    vi = v[i * n_u:(i + 1) * n_u]
    Rz = Ri[:, J] @ _zsel(z, J)
    bound = si.reshape(1, -1) @ z - y[i:i + 1]
    if isinstance(cost, QuadraticCost):
        arg = vstack_affs([cost.Q_sqrt @ Rz, cost.R_sqrt @ vi])
        p.add_quad_leq(arg, bound)
    elif isinstance(cost, SetDistanceCost):
        xii = xi[i * n_x:(i + 1) * n_x]
        p.add_leq(cost.target.F @ xii - _target_rhs(spec))
        arg = vstack_affs([
            cost.Q_sqrt @ (Rz - xii.as_aff()),
            cost.R_sqrt @ (vi - (cost.K @ Rz)),
        ])
        p.add_quad_leq(arg, bound)
    else:
        raise TypeError(f"unsupported cost type {type(cost).__name__}")


def _target_rhs(spec):
    cost = spec.cost
    return cost.target.z


def _zsel(z, J):
    return z[np.asarray(J, dtype=int)]


def _apply_objective(p, spec, z):
    t = spec.triplet
    obj = spec.objective
    if obj is None:
        c = -np.ones(t.f)
        if spec.freeze_z1 is not None:
            c[: t.f1] = 0.0
        obj = LinearObjective(c)
    if isinstance(obj, LinearObjective):
        c = obj.c
        if c.size != t.f:
            raise ValueError("linear objective weight length must be f")
        free = np.ones(t.f, dtype=bool)
        if spec.freeze_z1 is not None:
            free[: t.f1] = False
        if np.any(c[free] >= 0):
            raise ValueError("linear objective weights must be strictly negative")
        p.minimize(c.reshape(1, -1) @ z)
    elif isinstance(obj, InfDistanceObjective):
        if obj.zeta.size != t.f or obj.weights.size != t.f:
            raise ValueError("inf-distance objective needs f weights and f bounds")
        tvar = p.add_inf_norm_epigraph(z - obj.zeta, obj.weights)
        p.minimize(np.array([[1.0]]) @ tvar)
    else:
        raise TypeError(f"unknown objective {type(obj).__name__}")


def _finish(p, spec, has_xi) -> SynthesisResult:
    t = spec.triplet
    n_u = spec.system.n_u
    sol = p.solve()
    sizes = {"variables": p.n_vars, "affine_rows": p.n_affine_rows,
             "cones": p.n_quad_constraints}
    if sol.status == "infeasible":
        raise Infeasible("no CLF exists in this configuration class "
                         f"(lambda={spec.lam})")
    if sol.status in ("unbounded", "numerical_trouble"):
        raise SolverFailure(f"synthesis solve ended with status {sol.status}: "
                            f"{sol.residuals}")
    z = sol.values["z"]
    v = sol.values["v"].reshape(t.v, n_u)
    y = sol.values["y"]
    xi = sol.values["xi"].reshape(t.v, t.n_x) if has_xi else None
    diag = _diagnostics(spec, z, v, y, xi)
    diag["solver"] = sol.solver
    diag["iterations"] = sol.iterations
    return SynthesisResult(z=z, v=v, y=y, status="optimal",
                           objective_value=float(sol.objective),
                           kind=t.kind, lam=spec.lam, diagnostics=diag, xi=xi,
                           sizes=sizes, target_zs=spec.target_zs)


def _diagnostics(spec, z, v, y, xi) -> dict:
    t = spec.triplet
    sysm = spec.system
    out = {}
    out["config_resid"] = float(np.max(t.E @ z))
    pts = t.vertex_points(z)
    out["facet_resid"] = float(np.max(pts @ t.F.T - z))
    if t.kind == "nominal":
        out["pin_resid"] = float(np.max(np.abs(t.V[0] @ z)))
    else:
        out["pin_resid"] = float(abs(z[-1]))
    X, U = sysm.X, sysm.U
    out["state_resid"] = float(max(np.max(X.F @ t.R(i) @ z - X.z)
                                   for i in range(t.v)))
    out["input_resid"] = float(max(np.max(U.F @ v[i] - U.z)
                                   for i in range(t.v)))
    cost_worst = -np.inf
    for i in range(t.v):
        L = spec.cost.eval(t.R(i) @ z, v[i])
        cost_worst = max(cost_worst, L + y[i] - float(t.s(i) @ z))
    out["cost_resid"] = float(cost_worst)
    return out


# ---------------------------------------------------------------------------
# nominal synthesis
# ---------------------------------------------------------------------------

def synth_nominal(spec: SynthesisSpec) -> SynthesisResult:
    """Single convex program for the nominal CLF in the given configuration."""
    t = spec.triplet
    if t.kind != "nominal":
        raise ModeMismatch("nominal synthesis needs a nominal-kind triplet")
    if spec.uncertainty is not None or spec.target_zs is not None:
        raise ModeMismatch("nominal synthesis takes no uncertainty model")
    sysm = spec.system
    n_x, n_u = t.n_x, sysm.n_u
    f, f1, f2, vcount = t.f, t.f1, t.f2, t.v
    G1, G2, h2 = t.G1, t.G2, t.h2
    A, B = sysm.A, sysm.B
    lam = spec.lam

    p = ConvexProgram()
    z = p.add_variable("z", f)
    v = p.add_variable("v", vcount * n_u)
    y = p.add_variable("y", vcount)
    has_xi = isinstance(spec.cost, SetDistanceCost)
    xi = p.add_variable("xi", vcount * n_x) if has_xi else None

    G1A, G1B = G1 @ A, G1 @ B
    G2A, G2B = G2 @ A, G2 @ B
    XF, Xz = sysm.X.F, sysm.X.z
    UF, Uz = sysm.U.F, sysm.U.z

    contract = _FamilyBuilder(f, vcount * n_u, vcount)
    epigraph = _FamilyBuilder(f, vcount * n_u, vcount)
    member_x = _FamilyBuilder(f, vcount * n_u, vcount)
    member_u = _FamilyBuilder(f, vcount * n_u, vcount)
    for i in range(vcount):
        J = np.asarray(t.active_sets[i])
        RJ = t.V[i][:n_x, J]
        vcols = np.arange(i * n_u, (i + 1) * n_u)
        contract.block(z_cols=J, z_block=G1A @ RJ,
                       z_diag_cols=np.arange(f1), z_diag=np.full(f1, -lam),
                       v_cols=vcols, v_block=G1B, const=np.zeros(f1))
        epigraph.block(z_cols=J, z_block=G2A @ RJ,
                       z_diag_cols=np.arange(f1, f), z_diag=-np.ones(f2),
                       v_cols=vcols, v_block=G2B, y_col=i, y_coefs=h2,
                       const=np.zeros(f2))
        member_x.block(z_cols=J, z_block=XF @ RJ, const=-Xz)
        member_u.block(v_cols=vcols, v_block=UF, const=-Uz)
        _vertex_cost_cone(p, spec, i, z, v, y, xi)
    for fam in (contract, epigraph, member_x, member_u):
        fam.emit(p, z, v, y)

    p.add_leq(matmul(t.E, z))
    p.add_eq(t.V[0] @ z)
    if spec.freeze_z1 is not None:
        p.add_eq(z[0:f1] - spec.freeze_z1)
    _apply_objective(p, spec, z)
    return _finish(p, spec, has_xi)


# ---------------------------------------------------------------------------
# robust synthesis
# ---------------------------------------------------------------------------

def synth_robust(spec: SynthesisSpec) -> SynthesisResult:
    """Worst-case synthesis over the uncertainty vertices, flat facet pinned."""
    t = spec.triplet
    if t.kind != "robust":
        raise ModeMismatch("robust synthesis needs a robust-kind triplet")
    if not spec.robust_mode:
        raise ModeMismatch("robust synthesis needs uncertainty and target_zs")
    if spec.target_zs.size != t.f1:
        raise ModeMismatch("target_zs must have length f1")
    sysm = spec.system
    unc = spec.uncertainty
    n_x, n_u = t.n_x, sysm.n_u
    f, f1, f2, vcount = t.f, t.f1, t.f2, t.v
    G = t.F[:, :n_x]
    h = t.F[:, -1]
    lam = spec.lam
    zs = spec.target_zs
    w_bar = unc.w_supports(G)

    p = ConvexProgram()
    z = p.add_variable("z", f)
    v = p.add_variable("v", vcount * n_u)
    y = p.add_variable("y", vcount)
    has_xi = isinstance(spec.cost, SetDistanceCost)
    xi = p.add_variable("xi", vcount * n_x) if has_xi else None

    XF, Xz = sysm.X.F, sysm.X.z
    UF, Uz = sysm.U.F, sysm.U.z

    contract = _FamilyBuilder(f, vcount * n_u, vcount)
    epigraph = _FamilyBuilder(f, vcount * n_u, vcount)
    member_x = _FamilyBuilder(f, vcount * n_u, vcount)
    member_u = _FamilyBuilder(f, vcount * n_u, vcount)
    for A_l, B_l in unc.AB_vertices:
        GA, GB = G @ A_l, G @ B_l
        for i in range(vcount):
            J = np.asarray(t.active_sets[i])
            RJ = t.V[i][:n_x, J]
            vcols = np.arange(i * n_u, (i + 1) * n_u)
            # domain rows: D_ij <= lam z_j + (1 - lam) zs_j
            contract.block(z_cols=J, z_block=GA[:f1] @ RJ,
                           z_diag_cols=np.arange(f1), z_diag=np.full(f1, -lam),
                           v_cols=vcols, v_block=GB[:f1],
                           const=w_bar[:f1] - (1.0 - lam) * zs)
            # lower rows: D_ij + h_j y_i <= z_j
            epigraph.block(z_cols=J, z_block=GA[f1:] @ RJ,
                           z_diag_cols=np.arange(f1, f), z_diag=-np.ones(f2),
                           v_cols=vcols, v_block=GB[f1:], y_col=i,
                           y_coefs=h[f1:], const=w_bar[f1:])
    for i in range(vcount):
        J = np.asarray(t.active_sets[i])
        RJ = t.V[i][:n_x, J]
        vcols = np.arange(i * n_u, (i + 1) * n_u)
        member_x.block(z_cols=J, z_block=XF @ RJ, const=-Xz)
        member_u.block(v_cols=vcols, v_block=UF, const=-Uz)
        _vertex_cost_cone(p, spec, i, z, v, y, xi)
    for fam in (contract, epigraph, member_x, member_u):
        fam.emit(p, z, v, y)

    p.add_leq(matmul(t.E, z))
    p.add_eq(z[f - 1:f])
    if spec.freeze_z1 is not None:
        p.add_eq(z[0:f1] - spec.freeze_z1)
    _apply_objective(p, spec, z)
    result = _finish(p, spec, has_xi)
    result.diagnostics["flat_resid"] = float(abs(result.z[-1]))
    return result


def synthesize(spec: SynthesisSpec) -> SynthesisResult:
    return synth_robust(spec) if spec.triplet.kind == "robust" else synth_nominal(spec)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    n_samples: int
    n_checked: int = 0
    n_skipped: int = 0
    min_residual: float = float("inf")
    violations: list = field(default_factory=list)
    tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"n_samples": self.n_samples, "n_checked": self.n_checked,
                "n_skipped": self.n_skipped, "min_residual": self.min_residual,
                "violations": [[list(map(float, x)), float(r)]
                               for x, r in self.violations],
                "tol": self.tol}


def verify_clf(result: SynthesisResult, spec: SynthesisSpec, n_samples: int,
               u_grid_resolution: int = 41, seed: int = 0) -> VerificationReport:
    """Samples dom(M) and checks the control Lyapunov inequality numerically.

    The right-hand side minimizes over a u grid with local refinement; in
    robust mode the inner maximum runs over the uncertainty vertices.
    Residuals below -1e-6 are reported as violations.
    """
    report = VerificationReport(n_samples=n_samples)
    if n_samples <= 0:
        return report
    M = _pwa.PwaFunction(spec.triplet, result.z)
    unc = spec.uncertainty if spec.robust_mode else None
    search = _pwa.USearch(grid_res=u_grid_resolution)
    rng = np.random.default_rng(seed)
    dom_pts = M.vertex_points[:, :-1]
    lo, hi = dom_pts.min(axis=0), dom_pts.max(axis=0)
    drawn = 0
    while report.n_checked < n_samples and drawn < 80 * n_samples:
        drawn += 1
        x = lo + rng.uniform(0.0, 1.0, size=lo.size) * (hi - lo)
        if not M.in_domain(x):
            report.n_skipped += 1
            continue
        r = _pwa.hjb_residual(M, spec.system, spec.cost, unc, x, search)
        report.n_checked += 1
        report.min_residual = min(report.min_residual, r)
        if r < -report.tol:
            report.violations.append((x.copy(), float(r)))
    return report
