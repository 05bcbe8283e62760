"""Pareto fronts: extraction from the augmented field and the weighted-sum
scalarization baseline.

A budget gridline (W(x, b), b) lies on the front exactly when every budget
coordinate is tight; discretely, reducing any single b_i by one gridstep must
increase W by more than the noise threshold theta = hat_h * k2 (k2 bounds the
primary running cost).  The weighted-sum baseline recovers only the convex
part of the front and is used for cross-validation and gap detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .augmented import AugmentedField
from .core import (ControlProblem, GriddedCost, TerminalCost,
                   interpolate_bilinear)
from .errors import ValidationError
from .restricted import solve_restricted
from .static_solver import StaticSolveParams, solve_static


@dataclass
class ParetoFront:
    start: tuple
    points: np.ndarray  # rows (J_0, b_1[, b_2]), ascending in b_1
    tight_mask: np.ndarray
    source: str = "augmented"

    def __len__(self):
        return len(self.points)

    def tight_points(self) -> np.ndarray:
        return self.points[self.tight_mask]


@dataclass
class WeightMesh:
    lambdas: np.ndarray  # (m, r+1) rows on the simplex

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        if lam.ndim != 2:
            raise ValidationError("weight mesh must be a 2-d array")
        if (lam < -1e-12).any() or np.abs(lam.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValidationError("weights must be non-negative and sum to 1")
        self.lambdas = lam

    @classmethod
    def uniform(cls, m: int = 21, r: int = 1) -> "WeightMesh":
        if r != 1:
            raise ValidationError("uniform mesh implemented for r = 1")
        lam0 = np.linspace(0.0, 1.0, m)
        return cls(np.column_stack([lam0, 1.0 - lam0]))


def tightness_threshold(problem: ControlProblem) -> float:
    return problem.hat_h * problem.primary_k2()


def extract_front(field: AugmentedField, problem: ControlProblem,
                  start) -> ParetoFront:
    """Tight budget gridlines of W at one start position.

    Reads W(start, b) by spatial interpolation per budget gridline; a line is
    tight in coordinate i when stepping b_i down one gridstep raises W by
    more than theta.  Tight lines are deduplicated by J_0 within theta.
    """
    x, y = float(start[0]), float(start[1])
    if problem.in_obstacle(x, y):
        raise ValidationError(f"start ({x}, {y}) lies inside an obstacle")
    theta = tightness_threshold(problem)
    r = field.r
    b1s = field.budgets.values(0)
    rows = []
    tight = []
    if r == 1:
        curve = np.array([field.value_at((x, y), (b,)) for b in b1s])
        for j, b in enumerate(b1s):
            w = curve[j]
            if not np.isfinite(w):
                continue
            prev = curve[j - 1] if j > 0 else np.inf
            is_tight = (prev - w) > theta if np.isfinite(prev) else True
            rows.append((w, b))
            tight.append(is_tight)
    else:
        b2s = field.budgets.values(1)
        for j, b1 in enumerate(b1s):
            for k, b2 in enumerate(b2s):
                w = field.value_at((x, y), (b1, b2))
                if not np.isfinite(w):
                    continue
                p1 = field.value_at((x, y), (b1s[j - 1], b2)) if j > 0 else np.inf
                p2 = field.value_at((x, y), (b1, b2s[k - 1])) if k > 0 else np.inf
                t1 = (p1 - w) > theta if np.isfinite(p1) else True
                t2 = (p2 - w) > theta if np.isfinite(p2) else True
                rows.append((w, b1, b2))
                tight.append(t1 and t2)
    rows = np.asarray(rows) if rows else np.zeros((0, 1 + r))
    tight = np.asarray(tight, dtype=bool)

    # keep tight rows only, deduplicated by J_0 within theta (smallest budgets win)
    keep_rows = []
    seen: list[float] = []
    for idx in np.argsort(rows[: , 1]) if len(rows) else []:
        if not tight[idx]:
            continue
        j0 = rows[idx, 0]
        if any(abs(j0 - s) <= theta for s in seen):
            continue
        seen.append(j0)
        keep_rows.append(rows[idx])
    pts = np.asarray(keep_rows) if keep_rows else np.zeros((0, 1 + r))
    order = np.argsort(pts[:, 1]) if len(pts) else []
    pts = pts[order] if len(pts) else pts
    return ParetoFront((x, y), pts, np.ones(len(pts), dtype=bool), "augmented")


def weighted_sum_front(problem: ControlProblem, mesh: WeightMesh, start,
                       params: StaticSolveParams | None = None) -> ParetoFront:
    """Scalarization baseline: solve u for K_lambda, then the restricted
    costs against it, per weight vector.  Emits (v_0, ..., v_r) at start;
    per-lambda validation failures are recorded and skipped."""
    if len(mesh.lambdas) == 0:
        raise ValidationError("weight mesh is empty")
    if not problem.speed.isotropic:
        raise ValidationError("weighted-sum baseline requires isotropic speed")
    x, y = float(start[0]), float(start[1])
    grid = problem.grid
    ncost = len(problem.costs)
    cost_grids = [c.grid_values(grid, problem.speed) for c in problem.costs]
    failures = []
    pts = []
    for lam in mesh.lambdas:
        kvals = sum(l * gv for l, gv in zip(lam, cost_grids))
        finite = np.isfinite(kvals)
        if not finite.any() or kvals[finite].min() <= 0:
            failures.append((tuple(lam), "K_lambda violates A2"))
            continue
        entries = {}
        keys = set()
        for term in problem.terminals:
            keys.update(term.entries.keys())
        for key in keys:
            q = 0.0
            for l, term in zip(lam, problem.terminals):
                qi = term.q_at(*key)
                if l > 0 and not np.isfinite(qi):
                    q = np.inf
                    break
                q += l * (qi if np.isfinite(qi) else 0.0)
            entries[key] = q
        k_lam = GriddedCost(grid, kvals)
        q_lam = TerminalCost(grid, entries)
        lam_problem = ControlProblem(
            grid=grid, speed=problem.speed,
            costs=[k_lam] + list(problem.costs[1:]),
            terminals=[q_lam] + list(problem.terminals[1:]),
            budgets=problem.budgets, obstacles=problem.obstacles,
        )
        try:
            u_lam = solve_static(lam_problem, 0, params)
            # restricted costs of the original problem along u_lam paths
            vs = solve_restricted(
                lam_problem, u_lam, 0, list(range(1, ncost + 1)), params,
                costs=[k_lam] + list(problem.costs),
                terminals=[q_lam] + list(problem.terminals),
            )
        except Exception as exc:  # per-lambda failure, others proceed
            failures.append((tuple(lam), str(exc)))
            continue
        row = [float(interpolate_bilinear(v, (x, y))) for v in vs]
        if all(np.isfinite(row)):
            pts.append((row[0], *row[1:]))
    pts = np.asarray(pts) if pts else np.zeros((0, ncost))
    if len(pts):
        pts = pts[np.argsort(pts[:, 1])]
    front = ParetoFront((x, y), pts, np.ones(len(pts), dtype=bool), "weighted-sum")
    front.failures = failures
    return front


def lower_convex_envelope(points: np.ndarray):
    """Lower hull of (b, J0) pairs as a piecewise-linear callable."""
    if len(points) == 0:
        return lambda b: np.inf
    pts = sorted({(float(p[1]), float(p[0])) for p in points})
    hull = []
    for b, j0 in pts:
        while len(hull) >= 2:
            (b1, j1), (b2, j2) = hull[-2], hull[-1]
            # keep right turns only (convex from below)
            if (b2 - b1) * (j0 - j1) - (j2 - j1) * (b - b1) <= 0:
                hull.pop()
            else:
                break
        hull.append((b, j0))
    bs = np.array([p[0] for p in hull])
    js = np.array([p[1] for p in hull])

    def env(b):
        if b < bs[0] - 1e-12 or b > bs[-1] + 1e-12:
            return np.inf
        return float(np.interp(b, bs, js))

    return env


@dataclass
class FrontComparison:
    augmented: ParetoFront
    weighted: ParetoFront
    theta: float
    max_gap: float        # largest J_0 drop below the weighted-sum envelope
    gap_budget: float | None
    nonconvex_detected: bool
    hausdorff: float      # reporting-only cross-check distance

    def __str__(self):
        s = (f"{len(self.augmented.points)} augmented vs "
             f"{len(self.weighted.points)} weighted-sum points; "
             f"max envelope gap {self.max_gap:.4g}")
        if self.nonconvex_detected:
            s += f" (> 3*theta = {3 * self.theta:.4g}: non-convex segment)"
        return s


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) == 0 or len(b) == 0:
        return math.inf
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def compare_fronts(problem: ControlProblem, field: AugmentedField, start,
                   mesh: WeightMesh | None = None,
                   params: StaticSolveParams | None = None) -> FrontComparison:
    """Run both constructions and measure the convex-envelope gap."""
    if problem.r != 1:
        raise ValidationError("front comparison implemented for r = 1")
    mesh = mesh or WeightMesh.uniform(21, 1)
    aug = extract_front(field, problem, start)
    ws = weighted_sum_front(problem, mesh, start, params)
    theta = tightness_threshold(problem)
    env = lower_convex_envelope(ws.points)
    max_gap = 0.0
    gap_b = None
    for j0, b in aug.points[:, :2]:
        e = env(b)
        if np.isfinite(e) and e - j0 > max_gap:
            max_gap = e - j0
            gap_b = float(b)
    hd = hausdorff_distance(aug.points[:, :2] if len(aug.points) else aug.points,
                            ws.points[:, :2] if len(ws.points) else ws.points)
    return FrontComparison(aug, ws, theta, float(max_gap), gap_b,
                           max_gap > 3 * theta, hd)
