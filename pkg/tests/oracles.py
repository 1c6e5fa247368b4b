"""Independent reference computations used by the test suite.

These deliberately do not share code with the package internals: the brute
force vertex oracle solves every C(m, n) active-set system directly, and the
other helpers use plain numpy/scipy paths.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def brute_force_vertices(F, z, tol=1e-9):
    """All vertices of {x | Fx <= z} by solving every n-subset system."""
    F = np.asarray(F, dtype=float)
    z = np.asarray(z, dtype=float).reshape(-1)
    m, n = F.shape
    found = []
    for J in itertools.combinations(range(m), n):
        B = F[list(J)]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        x = np.linalg.solve(B, z[list(J)])
        if np.all(F @ x <= z + tol):
            found.append(x)
    uniq = []
    for x in found:
        if not any(np.max(np.abs(x - y)) <= 1e-8 for y in uniq):
            uniq.append(x)
    uniq.sort(key=tuple)
    return uniq


def support_by_lp(F, z, d):
    res = linprog(-np.asarray(d, dtype=float), A_ub=F, b_ub=z,
                  bounds=[(None, None)] * F.shape[1], method="highs")
    assert res.status == 0, f"oracle support LP status {res.status}"
    return float(np.asarray(d) @ res.x)


def in_hull_plus_vertical_ray(point, generators, tol=1e-8):
    """Feasibility LP: point in conv(generators) + {t * e_n, t >= 0}."""
    G = np.atleast_2d(np.asarray(generators, dtype=float))
    p = np.asarray(point, dtype=float).reshape(-1)
    k, n = G.shape
    # variables: theta (k), t (1)
    A_eq = np.zeros((n + 1, k + 1))
    A_eq[:n, :k] = G.T
    A_eq[n - 1, k] = 1.0
    A_eq[n, :k] = 1.0
    b_eq = np.concatenate([p, [1.0]])
    res = linprog(np.zeros(k + 1), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * (k + 1), method="highs")
    if res.status != 0:
        return False
    return float(np.max(np.abs(A_eq @ res.x - b_eq))) <= tol
