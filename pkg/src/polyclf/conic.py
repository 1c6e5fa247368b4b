"""Solver-agnostic convex program builder.

Programs are assembled from named variable blocks, affine rows, and
quadratic-cone constraints of the form ||C x + d||^2 <= a^T x + b. Pure
linear programs are dispatched to scipy's HiGHS backend; programs with
quadratic cones are lowered to second-order-cone form and solved with
Clarabel. Every Optimal solution is re-checked for primal feasibility
independently of the solver; failures downgrade the status to
"numerical_trouble".
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import SolverFailure

AFFINE_FEAS_TOL = 1e-7
QUAD_FEAS_TOL = 1e-6

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_TROUBLE = "numerical_trouble"


def _to_csr(M):
    if sparse.issparse(M):
        return M.tocsr()
    return sparse.csr_matrix(np.atleast_2d(np.asarray(M, dtype=float)))


def _madd(A, B):
    if sparse.issparse(A) or sparse.issparse(B):
        return _to_csr(A) + _to_csr(B)
    return A + B


class Aff:
    """Affine expression: sum of coefficient @ variable terms plus a constant."""

    __array_ufunc__ = None
    __slots__ = ("terms", "const", "nrows")

    def __init__(self, terms, const, nrows):
        self.terms = terms
        self.const = const
        self.nrows = nrows

    @classmethod
    def constant(cls, vec):
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        return cls({}, vec, vec.size)

    def _binop(self, other, sign):
        other = as_aff(other, like_rows=self.nrows)
        if other.nrows != self.nrows:
            raise ValueError(f"row mismatch: {self.nrows} vs {other.nrows}")
        terms = dict(self.terms)
        for name, M in other.terms.items():
            M2 = M if sign > 0 else -M
            terms[name] = _madd(terms[name], M2) if name in terms else M2
        return Aff(terms, self.const + sign * other.const, self.nrows)

    def __add__(self, other):
        return self._binop(other, +1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binop(other, -1)

    def __rsub__(self, other):
        return (-self)._binop(other, +1)

    def __neg__(self):
        return Aff({k: -M for k, M in self.terms.items()}, -self.const, self.nrows)

    def __mul__(self, alpha):
        alpha = float(alpha)
        return Aff({k: alpha * M for k, M in self.terms.items()},
                   alpha * self.const, self.nrows)

    __rmul__ = __mul__

    def __rmatmul__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float)) if not sparse.issparse(M) else M
        k = M.shape[0]
        terms = {name: _to_csr(M) @ _to_csr(T) if sparse.issparse(M) or sparse.issparse(T)
                 else M @ T for name, T in self.terms.items()}
        return Aff(terms, M @ self.const, k)

    def value(self, values: dict) -> np.ndarray:
        out = self.const.copy()
        for name, M in self.terms.items():
            out = out + np.asarray(_to_csr(M) @ values[name]).reshape(-1)
        return out


def vstack_affs(affs):
    affs = [a.as_aff() if isinstance(a, Var) else a for a in affs]
    nrows = sum(a.nrows for a in affs)
    names = []
    for a in affs:
        for n in a.terms:
            if n not in names:
                names.append(n)
    terms = {}
    for name in names:
        blocks = []
        for a in affs:
            if name in a.terms:
                blocks.append(_to_csr(a.terms[name]))
            else:
                width = _to_csr(next(iter(
                    b.terms[name] for b in affs if name in b.terms))).shape[1]
                blocks.append(sparse.csr_matrix((a.nrows, width)))
        terms[name] = sparse.vstack(blocks, format="csr")
    const = np.concatenate([a.const for a in affs])
    return Aff(terms, const, nrows)


class Var:
    """Named decision-variable block."""

    __array_ufunc__ = None
    __slots__ = ("name", "size")

    def __init__(self, name, size):
        self.name = name
        self.size = size

    def as_aff(self) -> Aff:
        return Aff({self.name: sparse.eye(self.size, format="csr")},
                   np.zeros(self.size), self.size)

    def __getitem__(self, key):
        sel = sparse.eye(self.size, format="csr")[key]
        if sel.ndim == 1:
            sel = sel.reshape(1, -1)
        return Aff({self.name: sel}, np.zeros(sel.shape[0]), sel.shape[0])

    def __rmatmul__(self, M):
        return self.as_aff().__rmatmul__(M)

    def __add__(self, other):
        return self.as_aff() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self.as_aff() - other

    def __rsub__(self, other):
        return other - self.as_aff()

    def __neg__(self):
        return -self.as_aff()

    def __mul__(self, alpha):
        return self.as_aff() * alpha

    __rmul__ = __mul__


def matmul(M, x) -> Aff:
    """M @ x for matrices that do not defer to the expression types (sparse)."""
    return as_aff(x).__rmatmul__(M)


def as_aff(obj, like_rows=None) -> Aff:
    if isinstance(obj, Aff):
        return obj
    if isinstance(obj, Var):
        return obj.as_aff()
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 0:
        if like_rows is None:
            like_rows = 1
        return Aff.constant(np.full(like_rows, float(arr)))
    return Aff.constant(arr)


@dataclass
class Solution:
    status: str
    values: dict = field(default_factory=dict)
    objective: float | None = None
    iterations: int = 0
    solve_time: float = 0.0
    residuals: dict = field(default_factory=dict)
    solver: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _Quad:
    arg: Aff
    bound: Aff


class ConvexProgram:
    """Mutable program builder; freeze happens implicitly at solve time."""

    def __init__(self):
        self._vars: dict[str, Var] = {}
        self._order: list[str] = []
        self._leq: list[Aff] = []
        self._eq: list[Aff] = []
        self._quads: list[_Quad] = []
        self._objective: Aff | None = None
        self._aux_count = 0

    # -- construction --------------------------------------------------

    def add_variable(self, name: str, size: int) -> Var:
        if name in self._vars:
            raise ValueError(f"variable {name!r} already registered")
        if size <= 0:
            raise ValueError("variable size must be positive")
        v = Var(name, int(size))
        self._vars[name] = v
        self._order.append(name)
        return v

    def add_leq(self, expr):
        """expr <= 0 elementwise."""
        self._leq.append(as_aff(expr))

    def add_eq(self, expr):
        """expr == 0 elementwise."""
        self._eq.append(as_aff(expr))

    def add_quad_leq(self, arg, bound):
        """||arg||^2 <= bound, with bound a scalar affine expression."""
        arg = as_aff(arg)
        bound = as_aff(bound)
        if bound.nrows != 1:
            raise ValueError("quadratic bound must be scalar")
        self._quads.append(_Quad(arg, bound))

    def add_inf_norm_epigraph(self, rows, weights) -> Var:
        """Adds t with +-w_i * rows_i <= t and returns t."""
        rows = as_aff(rows)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size != rows.nrows:
            raise ValueError("one weight per row required")
        if np.any(np.abs(w) < 1e-12):
            raise ValueError("weights must be invertible (no zero entries)")
        t = self.add_variable(f"_infnorm_t{self._aux_count}", 1)
        self._aux_count += 1
        ones = np.ones((rows.nrows, 1))
        W = np.diag(w)
        self.add_leq(W @ rows - ones @ t)
        self.add_leq(-1.0 * (W @ rows) - ones @ t)
        return t

    def minimize(self, expr):
        expr = as_aff(expr)
        if expr.nrows != 1:
            raise ValueError("objective must be scalar")
        self._objective = expr

    # -- assembly --------------------------------------------------------

    def _offsets(self):
        offsets, total = {}, 0
        for name in self._order:
            offsets[name] = total
            total += self._vars[name].size
        return offsets, total

    def _stack(self, affs, offsets, total):
        if not affs:
            return sparse.csr_matrix((0, total)), np.zeros(0)
        blocks, consts = [], []
        for a in affs:
            cols = []
            for name in self._order:
                if name in a.terms:
                    cols.append(_to_csr(a.terms[name]))
                else:
                    cols.append(sparse.csr_matrix((a.nrows, self._vars[name].size)))
            blocks.append(sparse.hstack(cols, format="csr"))
            consts.append(a.const)
        return sparse.vstack(blocks, format="csr"), np.concatenate(consts)

    def _objective_vector(self, offsets, total):
        c = np.zeros(total)
        c0 = 0.0
        if self._objective is not None:
            for name, M in self._objective.terms.items():
                row = np.asarray(_to_csr(M).todense()).reshape(-1)
                off = offsets[name]
                c[off:off + row.size] += row
            c0 = float(self._objective.const[0])
        return c, c0

    @property
    def n_vars(self) -> int:
        return sum(v.size for v in self._vars.values())

    @property
    def n_affine_rows(self) -> int:
        return sum(a.nrows for a in self._leq) + sum(a.nrows for a in self._eq)

    @property
    def n_quad_constraints(self) -> int:
        return len(self._quads)

    def dump(self) -> str:
        """Deterministic sparse-triplet JSON of the assembled program."""
        offsets, total = self._offsets()
        A_in, b_in = self._stack(self._leq, offsets, total)
        A_eq, b_eq = self._stack(self._eq, offsets, total)
        c, c0 = self._objective_vector(offsets, total)

        def trip(A):
            A = A.tocoo()
            order = np.lexsort((A.col, A.row))
            return {"shape": list(A.shape),
                    "rows": A.row[order].tolist(),
                    "cols": A.col[order].tolist(),
                    "vals": A.data[order].tolist()}

        quads = []
        for q in self._quads:
            C, d = self._stack([q.arg], offsets, total)
            a, b0 = self._stack([q.bound], offsets, total)
            quads.append({"C": trip(C), "d": d.tolist(),
                          "a": trip(a), "b": b0.tolist()})
        doc = {
            "variables": [{"name": n, "size": self._vars[n].size} for n in self._order],
            "leq": {"A": trip(A_in), "rhs": (-b_in).tolist()},
            "eq": {"A": trip(A_eq), "rhs": (-b_eq).tolist()},
            "quads": quads,
            "objective": {"c": c.tolist(), "const": c0},
        }
        return json.dumps(doc, sort_keys=True)

    # -- solve -----------------------------------------------------------

    def solve(self) -> Solution:
        offsets, total = self._offsets()
        if total == 0:
            raise SolverFailure("program has no variables")
        A_in, b_in = self._stack(self._leq, offsets, total)
        A_eq, b_eq = self._stack(self._eq, offsets, total)
        c, c0 = self._objective_vector(offsets, total)
        if self._quads:
            sol = self._solve_clarabel(A_in, b_in, A_eq, b_eq, c, c0, offsets, total)
        else:
            sol = self._solve_highs(A_in, b_in, A_eq, b_eq, c, c0, offsets, total)
        if sol.status == OPTIMAL:
            self._recheck(sol, A_in, b_in, A_eq, b_eq, offsets, total)
        return sol

    def _split(self, x, offsets):
        return {name: x[offsets[name]:offsets[name] + self._vars[name].size].copy()
                for name in self._order}

    def _recheck(self, sol, A_in, b_in, A_eq, b_eq, offsets, total):
        x = np.concatenate([sol.values[n] for n in self._order])
        res = {}
        res["affine_ineq"] = float(np.max(A_in @ x + b_in)) if A_in.shape[0] else 0.0
        res["affine_eq"] = float(np.max(np.abs(A_eq @ x + b_eq))) if A_eq.shape[0] else 0.0
        worst_quad = 0.0
        for q in self._quads:
            lhs = float(np.sum(q.arg.value(sol.values) ** 2))
            rhs = float(q.bound.value(sol.values)[0])
            worst_quad = max(worst_quad, (lhs - rhs) / (1.0 + abs(rhs)))
        res["quad_rel"] = worst_quad
        sol.residuals.update(res)
        if (res["affine_ineq"] > AFFINE_FEAS_TOL
                or res["affine_eq"] > AFFINE_FEAS_TOL
                or res["quad_rel"] > QUAD_FEAS_TOL):
            sol.status = NUMERICAL_TROUBLE

    def _solve_highs(self, A_in, b_in, A_eq, b_eq, c, c0, offsets, total):
        t0 = time.perf_counter()
        res = linprog(
            c,
            A_ub=A_in if A_in.shape[0] else None,
            b_ub=-b_in if A_in.shape[0] else None,
            A_eq=A_eq if A_eq.shape[0] else None,
            b_eq=-b_eq if A_eq.shape[0] else None,
            bounds=[(None, None)] * total,
            method="highs",
        )
        dt = time.perf_counter() - t0
        status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status,
                                                               NUMERICAL_TROUBLE)
        sol = Solution(status=status, solver="highs", solve_time=dt)
        if res.x is not None:
            sol.values = self._split(np.asarray(res.x, dtype=float), offsets)
            sol.objective = float(res.fun) + c0
        sol.iterations = int(getattr(res, "nit", 0) or 0)
        return sol

    def _solve_clarabel(self, A_in, b_in, A_eq, b_eq, c, c0, offsets, total):
        import clarabel

        blocks, rhs, cones = [], [], []
        if A_eq.shape[0]:
            blocks.append(A_eq)
            rhs.append(-b_eq)
            cones.append(clarabel.ZeroConeT(A_eq.shape[0]))
        if A_in.shape[0]:
            blocks.append(A_in)
            rhs.append(-b_in)
            cones.append(clarabel.NonnegativeConeT(A_in.shape[0]))
        # ||Cx + d||^2 <= a^T x + b  lowers to the second-order cone
        # (a^T x + b + 1, 2(Cx + d), a^T x + b - 1).
        for q in self._quads:
            C, d = self._stack([q.arg], offsets, total)
            a_row, b_row = self._stack([q.bound], offsets, total)
            b0 = float(b_row[0])
            k = C.shape[0]
            block = sparse.vstack([-a_row, -2.0 * C, -a_row], format="csr")
            vec = np.concatenate([[b0 + 1.0], 2.0 * d, [b0 - 1.0]])
            blocks.append(block)
            rhs.append(vec)
            cones.append(clarabel.SecondOrderConeT(k + 2))
        A = sparse.vstack(blocks, format="csc") if blocks else sparse.csc_matrix((0, total))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        P = sparse.csc_matrix((total, total))
        S = clarabel.SolverStatus
        mapping = {
            S.Solved: OPTIMAL,
            S.AlmostSolved: OPTIMAL,  # re-check decides
            S.PrimalInfeasible: INFEASIBLE,
            S.AlmostPrimalInfeasible: INFEASIBLE,
            S.DualInfeasible: UNBOUNDED,
            S.AlmostDualInfeasible: UNBOUNDED,
        }
        # tight tolerances first; relax if the solver hits its numerical
        # floor (the independent re-check below still gates quality)
        out = None
        status = NUMERICAL_TROUBLE
        for tol in (1e-10, 1e-8, 1e-6):
            settings = clarabel.DefaultSettings()
            settings.verbose = False
            settings.tol_feas = tol
            settings.tol_gap_abs = tol
            settings.tol_gap_rel = tol
            settings.max_iter = 200
            try:
                solver = clarabel.DefaultSolver(P, c, A.tocsc(), b, cones, settings)
                out = solver.solve()
            except BaseException as exc:  # clarabel raises pyo3 exceptions
                raise SolverFailure(f"clarabel backend failed: {exc}") from exc
            status = mapping.get(out.status, NUMERICAL_TROUBLE)
            if status != NUMERICAL_TROUBLE:
                break
        sol = Solution(status=status, solver="clarabel",
                       iterations=int(out.iterations),
                       solve_time=float(out.solve_time))
        if status == OPTIMAL:
            x = np.asarray(out.x, dtype=float)
            sol.values = self._split(x, offsets)
            sol.objective = float(c @ x) + c0
        return sol
