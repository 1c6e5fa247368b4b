"""Closed-loop simulation under the explicit vertex-interpolation controller.

Disturbance policies cover the paper-style experiments: no disturbance, a
constant extreme disturbance, cycling through the disturbance vertices, and
a greedy worst case that picks the vertex maximizing the next value. Runs
terminate early with a breach marker if the state ever leaves the domain,
so invariance failures are loud.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import StartOutOfDomain
from .pwa import ExplicitController

DESCENT_TOL = 1e-6


@dataclass
class Trajectory:
    states: np.ndarray
    inputs: np.ndarray
    disturbances: np.ndarray | None
    M_values: np.ndarray
    stage_costs: np.ndarray
    descent_violations: list = field(default_factory=list)
    breach_step: int | None = None

    @property
    def steps(self) -> int:
        return self.inputs.shape[0]

    @property
    def breached(self) -> bool:
        return self.breach_step is not None

    def to_csv(self, path):
        n_x = self.states.shape[1]
        n_u = self.inputs.shape[1] if self.inputs.size else 1
        n_w = self.disturbances.shape[1] if self.disturbances is not None else 0
        header = (["step"] + [f"x{i + 1}" for i in range(n_x)]
                  + [f"u{i + 1}" for i in range(n_u)]
                  + [f"w{i + 1}" for i in range(n_w)]
                  + ["M", "L", "descent_residual"])
        viol = dict(self.descent_violations)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(self.states.shape[0]):
                row = [k] + list(self.states[k])
                if k < self.steps:
                    row += list(self.inputs[k])
                    row += list(self.disturbances[k]) if n_w else []
                    row += [self.M_values[k], self.stage_costs[k],
                            self._descent_residual(k)]
                else:
                    row += [""] * (n_u + n_w)
                    row += [self.M_values[k], "", ""]
                w.writerow(row)

    def _descent_residual(self, k) -> float:
        return float(self.M_values[k + 1] - self.M_values[k] + self.stage_costs[k])


class DisturbancePolicy:
    name = "none"

    def select(self, k, x, u, controller, sys):
        return None


class ExtremeConstant(DisturbancePolicy):
    """Fixed disturbance applied at every step."""

    name = "extreme_constant"

    def __init__(self, w):
        self.w = np.asarray(w, dtype=float).reshape(-1)

    def select(self, k, x, u, controller, sys):
        return self.w


class VertexCycle(DisturbancePolicy):
    """Cycles through the disturbance vertices by step index."""

    name = "vertex_cycle"

    def __init__(self, unc):
        self.vertices = unc.w_vertices()

    def select(self, k, x, u, controller, sys):
        return self.vertices[k % len(self.vertices)]


class WorstCaseGreedy(DisturbancePolicy):
    """Picks the vertex maximizing the next value (valid because M is convex)."""

    name = "worst_case_greedy"

    def __init__(self, unc):
        self.vertices = unc.w_vertices()

    def select(self, k, x, u, controller, sys):
        nxt = sys.A @ x + sys.B @ u
        vals = [controller.pwa.eval(nxt + w) for w in self.vertices]
        return self.vertices[int(np.argmax(vals))]


def simulate(sys, controller: ExplicitController, x0, steps: int,
             disturbance_policy: DisturbancePolicy | None = None,
             cost=None) -> Trajectory:
    """Closed loop x+ = A x + B feedback(x) + w with value and descent logging."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    M = controller.pwa
    if not M.in_domain(x):
        raise StartOutOfDomain(f"{x} is outside dom(M)")
    policy = disturbance_policy or DisturbancePolicy()
    states = [x.copy()]
    inputs, dists, m_vals, costs = [], [], [M.eval(x)], []
    violations = []
    breach = None
    for k in range(steps):
        u = controller.feedback(x)
        w = policy.select(k, x, u, controller, sys)
        x_next = sys.A @ x + sys.B @ u
        if w is not None:
            x_next = x_next + w
            dists.append(np.asarray(w, dtype=float))
        L = float(cost.eval(x, u)) if cost is not None else 0.0
        inputs.append(u)
        costs.append(L)
        m_next = M.eval(x_next)
        m_vals.append(m_next)
        states.append(x_next.copy())
        residual = m_next - m_vals[k] + L
        if np.isfinite(residual) and residual > DESCENT_TOL:
            violations.append((k, float(residual)))
        if not M.in_domain(x_next):
            breach = k
            break
        x = x_next
    return Trajectory(
        states=np.array(states),
        inputs=np.array(inputs) if inputs else np.zeros((0, sys.n_u)),
        disturbances=np.array(dists) if dists else None,
        M_values=np.array(m_vals),
        stage_costs=np.array(costs),
        descent_violations=violations,
        breach_step=breach,
    )
