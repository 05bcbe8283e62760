"""Visible/non-visible regions for stationary observers among obstacles.

Two Eikonal solves from the observer: psi_1 with unit speed everywhere and
psi_2 with zero speed inside the obstacles.  The non-visible region is where
psi_2 exceeds psi_1 by a (heuristic) threshold in units of h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Grid2, GriddedCost, ScalarField
from .errors import ValidationError
from .static_solver import fast_march_unit

DEFAULT_THRESHOLD = 2.0  # mask where psi_2 - psi_1 > threshold * h


@dataclass
class VisibilityResult:
    grid: Grid2
    observer: tuple
    non_visible: np.ndarray  # bool, True = hidden from the observer
    psi_free: ScalarField
    psi_blocked: ScalarField

    def visible_fraction(self) -> float:
        return 1.0 - float(self.non_visible.mean())


def obstacle_mask(grid: Grid2, obstacles) -> np.ndarray:
    mask = np.zeros((grid.nx, grid.ny), dtype=bool)
    xx, yy = grid.meshgrid()
    for r in obstacles:
        mask |= (xx >= r.x0) & (xx <= r.x1) & (yy >= r.y0) & (yy <= r.y1)
    return mask


def compute_visibility(observer, obstacles, grid: Grid2,
                       threshold: float = DEFAULT_THRESHOLD) -> VisibilityResult:
    ox, oy = float(observer[0]), float(observer[1])
    if not grid.contains(ox, oy):
        raise ValidationError(f"observer ({ox}, {oy}) outside the domain")
    for r in obstacles:
        if r.contains(ox, oy):
            raise ValidationError(f"observer ({ox}, {oy}) inside an obstacle")
    seed = grid.nearest_index(ox, oy)
    mask = obstacle_mask(grid, obstacles)
    if mask[seed]:
        raise ValidationError("observer gridpoint rasterizes into an obstacle")

    ones = np.ones((grid.nx, grid.ny))
    psi1 = fast_march_unit(grid, [(seed[0], seed[1], 0.0)], ones)
    blocked_speed = ones.copy()
    blocked_speed[mask] = 0.0
    psi2 = fast_march_unit(grid, [(seed[0], seed[1], 0.0)], blocked_speed)

    with np.errstate(invalid="ignore"):
        diff = psi2.values - psi1.values
    non_visible = np.where(
        np.isfinite(psi2.values), diff > threshold * grid.h, True)
    return VisibilityResult(grid, (ox, oy), non_visible, psi1, psi2)


def observability_cost(result: VisibilityResult, visible_rate: float,
                       hidden_rate: float) -> GriddedCost:
    """Piecewise-constant running cost: visible_rate on the visible region,
    hidden_rate on the non-visible region."""
    if visible_rate <= 0 or hidden_rate <= 0:
        raise ValidationError("observability rates must be positive")
    vals = np.where(result.non_visible, hidden_rate, visible_rate)
    return GriddedCost(result.grid, vals.astype(np.float64))


def ray_visibility_oracle(observer, obstacles, grid: Grid2) -> np.ndarray:
    """Exact segment-rectangle shadow test (True = hidden).

    A gridpoint is hidden when the open segment from the observer to it
    crosses the interior of any obstacle rectangle, or the point itself lies
    inside one.
    """
    ox, oy = float(observer[0]), float(observer[1])
    hidden = np.zeros((grid.nx, grid.ny), dtype=bool)
    rects = [(r.x0, r.x1, r.y0, r.y1) for r in obstacles]
    for ix in range(grid.nx):
        for iy in range(grid.ny):
            px, py = grid.point(ix, iy)
            hidden[ix, iy] = _segment_blocked(ox, oy, px, py, rects)
    return hidden


def _segment_blocked(x0, y0, x1, y1, rects) -> bool:
    dx = x1 - x0
    dy = y1 - y0
    for (rx0, rx1, ry0, ry1) in rects:
        if rx0 <= x1 <= rx1 and ry0 <= y1 <= ry1:
            return True
        # slab clip of the parametric segment against the open rectangle
        t0, t1 = 0.0, 1.0
        ok = True
        for p, rlo, rhi in ((dx, rx0 - x0, rx1 - x0), (dy, ry0 - y0, ry1 - y0)):
            if abs(p) < 1e-15:
                if rlo > 0.0 or rhi < 0.0:
                    ok = False
                    break
                continue
            ta, tb = rlo / p, rhi / p
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 >= t1:
                ok = False
                break
        if ok and t1 - t0 > 1e-12:
            return True
    return False
