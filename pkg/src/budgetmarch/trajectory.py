"""Optimal-trajectory reconstruction by following characteristics numerically.

follow_static descends a spatial value function u; follow_constrained follows
the discrete characteristics of the augmented scheme itself (the step policy
of the marching algorithm), so the traced path reproduces the scheme's
optimal controls rather than a re-discretization.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from ._pack import build_pack
from .augmented import AugmentedField
from .core import ControlProblem, ScalarField, Trajectory, integrate_costs
from .errors import InfeasibleStartError, TrajectoryError

STALL_TOL = 1e-10
STALL_STEPS = 10
TERMINAL_PROXIMITY = 1.5  # in units of h


def _terminal_hit(pack, x, y, h, cost_index=0):
    """Nearest finite-q terminal within the proximity radius: (index, dist)."""
    best = -1
    best_d = TERMINAL_PROXIMITY * h
    for t in range(pack.term_x.shape[0]):
        d = math.hypot(pack.term_x[t] - x, pack.term_y[t] - y)
        if d <= best_d and np.isfinite(pack.term_q[t, cost_index]):
            best = t
            best_d = d
    return best, best_d


def follow_static(problem: ControlProblem, u: ScalarField, start,
                  cost_index: int = 0, step: float | None = None,
                  tau: float | None = None, angle_samples: int = 8,
                  golden_tolerance: float = 1e-6) -> Trajectory:
    """Steepest-update descent of u from start, advancing `step` per move.

    cost_index names the running/terminal cost pair that u solves.
    """
    grid = problem.grid
    h = grid.h
    step = step if step is not None else h / 2.0
    if tau is None:
        tau = h / problem.speed.max_speed(grid)
    pack = build_pack(grid, problem.speed, problem.costs, problem.terminals,
                      problem.obstacles)
    x, y = float(start[0]), float(start[1])
    if not np.isfinite(u(x, y)):
        raise InfeasibleStartError(f"u is +inf at start ({x}, {y})")

    pts = [(x, y)]
    max_steps = grid.nx * grid.ny
    stall = 0
    reason = "steps"
    last_obj = np.inf
    q_final = None
    for _ in range(max_steps):
        t_hit, d_hit = _terminal_hit(pack, x, y, h, cost_index)
        if t_hit >= 0:
            if d_hit > 1e-12:
                pts.append((pack.term_x[t_hit], pack.term_y[t_hit]))
            q_final = pack.term_q[t_hit]
            reason = "target"
            break
        val, ang, term = _kernels.best_static(
            u.values, h, -1, -1, x, y, tau, angle_samples, golden_tolerance,
            *pack.speed_args, cost_index, *pack.cost_args, pack.obs,
            pack.term_x, pack.term_y,
            np.ascontiguousarray(pack.term_q[:, cost_index]),
        )
        if not np.isfinite(val):
            reason = "stall"
            break
        if val >= last_obj - STALL_TOL:
            stall += 1
            if stall >= STALL_STEPS:
                reason = "stall"
                break
        else:
            stall = 0
        last_obj = val
        x += step * math.cos(ang)
        y += step * math.sin(ang)
        x = min(max(x, 0.0), 1.0)
        y = min(max(y, 0.0), 1.0)
        pts.append((x, y))

    cum = integrate_costs(pts, problem.costs, problem.speed)
    if q_final is not None:
        cum[-1] = cum[-1] + np.where(np.isfinite(q_final), q_final, 0.0)
    return Trajectory(pts, cum, reason)


def follow_constrained(problem: ControlProblem, field: AugmentedField, start,
                       budget, angle_samples: int = 8,
                       golden_tolerance: float = 1e-6) -> Trajectory:
    """Constrained-optimal path from (start, budget) through the W field.

    Steps use the Algorithm-1 policy tau_a = db_1/K_1 so budgets decrement by
    exactly one b_1 gridstep per move; the accumulated costs satisfy
    J_i <= budget_i + db_i.
    """
    grid = problem.grid
    h = grid.h
    r = problem.r
    budget = [float(b) for b in (budget if np.ndim(budget) else [budget])]
    if len(budget) != r:
        raise InfeasibleStartError(f"budget must have {r} components")
    x, y = float(start[0]), float(start[1])
    w0 = field.value_at((x, y), budget)
    if not np.isfinite(w0):
        raise InfeasibleStartError(
            f"W is +inf at start ({x}, {y}) with budget {budget}")
    pack = build_pack(grid, problem.speed, problem.costs, problem.terminals,
                      problem.obstacles)
    db1 = problem.budgets.deltas[0]

    ncost = len(problem.costs)
    pts = [(x, y)]
    cum = [np.zeros(ncost)]
    b = list(budget)
    reason = "steps"
    max_steps = grid.nx * grid.ny + problem.budgets.counts[0]
    stall = 0
    last_val = np.inf
    for _ in range(max_steps):
        t_hit, d_hit = _terminal_hit(pack, x, y, h)
        if t_hit >= 0:
            tx, ty = pack.term_x[t_hit], pack.term_y[t_hit]
            q = np.where(np.isfinite(pack.term_q[t_hit]), pack.term_q[t_hit], 0.0)
            if d_hit > 1e-12:
                leg = integrate_costs([(x, y), (tx, ty)], problem.costs,
                                      problem.speed)[-1]
                pts.append((tx, ty))
                cum.append(cum[-1] + leg + q)
            else:
                cum[-1] = cum[-1] + q
            reason = "target"
            break
        if r == 1:
            val, ang, term = _kernels.best_trace_r1(
                field.values, h, db1, x, y, b[0], angle_samples,
                golden_tolerance, *pack.speed_args, *pack.cost_args, pack.obs,
                pack.term_x, pack.term_y, np.ascontiguousarray(pack.term_q),
            )
        else:
            val, ang, term = _kernels.best_trace_r2(
                field.values, h, db1, problem.budgets.deltas[1], x, y,
                b[0], b[1], angle_samples, golden_tolerance,
                *pack.speed_args, *pack.cost_args, pack.obs,
                pack.term_x, pack.term_y, np.ascontiguousarray(pack.term_q),
            )
        if not np.isfinite(val):
            reason = "budget"
            break
        if val >= last_val + STALL_TOL:
            stall += 1
            if stall >= STALL_STEPS:
                reason = "stall"
                break
        else:
            stall = 0
        last_val = val
        ca, sa = math.cos(ang), math.sin(ang)
        if term >= 0:
            tx, ty = pack.term_x[term], pack.term_y[term]
            leg = integrate_costs([(x, y), (tx, ty)], problem.costs, problem.speed)[-1]
            q = np.where(np.isfinite(pack.term_q[term]), pack.term_q[term], 0.0)
            pts.append((tx, ty))
            cum.append(cum[-1] + leg + q)
            reason = "target"
            break
        K1 = problem.costs[1].evaluate(x, y, ca, sa, problem.speed)
        t_step = db1 / K1
        f = problem.speed.evaluate(x, y, ca, sa)
        nxt = (x + t_step * f * ca, y + t_step * f * sa)
        step_cost = np.array([
            t_step * problem.costs[i].evaluate(x, y, ca, sa, problem.speed)
            for i in range(ncost)
        ])
        x, y = nxt
        pts.append((x, y))
        cum.append(cum[-1] + step_cost)
        for i in range(r):
            b[i] -= step_cost[1 + i]
    traj = Trajectory(pts, np.asarray(cum), reason)
    if reason in ("budget", "stall"):
        raise TrajectoryError(
            f"constrained trace stopped before the target ({reason})", traj)
    return traj
