"""Unconstrained value functions on the spatial grid.

solve_static computes the semi-Lagrangian fixed point

    U(x) = min_a { tau * K(x, a) + U(x + tau * f(x, a) * a) }

by Gauss-Seidel sweeps with alternating orders, starting from +inf with
Dirichlet data q on the boundary, terminal points and obstacles.
fast_march_unit is the Dijkstra-like solver for |grad psi| f = 1 used by the
visibility computation (isotropic, unit cost rate).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._pack import build_pack
from .core import INF, ControlProblem, Grid2, ScalarField
from .errors import SweepConvergenceError, ValidationError


@dataclass
class StaticSolveParams:
    tau: float | None = None  # default h / max f
    sweep_tolerance_factor: float = 1e-9
    max_sweeps: int = 200
    angle_samples: int = 8  # golden-section restart brackets on [0, 2pi)
    golden_tolerance: float = 1e-6
    first_order: int = 0  # starting sweep order, 0..3

    def __post_init__(self):
        if self.max_sweeps < 1 or self.angle_samples < 3:
            raise ValidationError("bad static solve parameters")
        if self.tau is not None and self.tau <= 0:
            raise ValidationError("tau must be positive")


def solve_static(problem: ControlProblem, cost_index: int,
                 params: StaticSolveParams | None = None) -> ScalarField:
    """Value function u_i for one running/terminal cost pair of the problem."""
    params = params or StaticSolveParams()
    grid = problem.grid
    cost = problem.costs[cost_index]
    terminal = problem.terminals[cost_index]
    pack = build_pack(grid, problem.speed, [cost], [terminal], problem.obstacles)

    tau = params.tau
    if tau is None:
        tau = grid.h / problem.speed.max_speed(grid)

    U = np.full((grid.nx, grid.ny), INF)
    fixed = np.zeros((grid.nx, grid.ny), dtype=np.uint8)
    fixed[0, :] = fixed[-1, :] = 1
    fixed[:, 0] = fixed[:, -1] = 1
    obst = problem.obstacle_mask()
    fixed[obst] = 1
    for (ix, iy), q in terminal.entries.items():
        U[ix, iy] = q
        fixed[ix, iy] = 1
    # boundary points keep their q (default +inf)
    for ix in range(grid.nx):
        for iy in (0, grid.ny - 1):
            if (ix, iy) not in terminal.entries:
                U[ix, iy] = INF
    U[obst] = INF

    last_change = INF
    for sweep in range(params.max_sweeps):
        order = (params.first_order + sweep) % 4
        last_change = _kernels.static_sweep(
            U, fixed, grid.h, tau, params.angle_samples, params.golden_tolerance,
            order, *pack.speed_args, 0, *pack.cost_args, pack.obs,
            pack.term_x, pack.term_y, np.ascontiguousarray(pack.term_q[:, 0]),
        )
        finite = U[np.isfinite(U)]
        scale = float(np.abs(finite).max()) if finite.size else 1.0
        tol = params.sweep_tolerance_factor * max(scale, 1.0)
        if last_change <= tol:
            return ScalarField(grid, U)
    residual = ScalarField(grid, np.full_like(U, last_change))
    raise SweepConvergenceError(
        f"no convergence after {params.max_sweeps} sweeps "
        f"(last max update {last_change:.3e})",
        residual,
    )


def solve_value_functions(problem: ControlProblem,
                          params: StaticSolveParams | None = None) -> list[ScalarField]:
    """u_i for every cost index of the problem."""
    return [solve_static(problem, i, params) for i in range(len(problem.costs))]


def fast_march_unit(grid: Grid2, seeds, speed, return_order: bool = False):
    """First-order fast marching for |grad psi| f = 1 from seeded values.

    seeds: iterable of (ix, iy, value); speed: array or ScalarField, f >= 0
    (points with f = 0 stay +inf unless seeded).
    """
    if isinstance(speed, ScalarField):
        f = speed.values
    else:
        f = np.asarray(speed, dtype=np.float64)
    if f.shape != (grid.nx, grid.ny):
        raise ValidationError("speed shape does not match grid")
    seeds = list(seeds)
    if not seeds:
        raise ValidationError("fast marching needs at least one seed")

    h = grid.h
    psi = np.full((grid.nx, grid.ny), INF)
    state = np.zeros((grid.nx, grid.ny), dtype=np.uint8)  # 0 far, 1 trial, 2 known
    heap = []
    order = []
    for ix, iy, val in seeds:
        psi[ix, iy] = min(psi[ix, iy], float(val))
        state[ix, iy] = 1
        heapq.heappush(heap, (psi[ix, iy], ix, iy))

    def update(ix, iy):
        if f[ix, iy] <= 0.0:
            return INF
        s = h / f[ix, iy]  # local travel time across one cell
        a = INF
        if ix > 0:
            a = min(a, psi[ix - 1, iy])
        if ix < grid.nx - 1:
            a = min(a, psi[ix + 1, iy])
        b = INF
        if iy > 0:
            b = min(b, psi[ix, iy - 1])
        if iy < grid.ny - 1:
            b = min(b, psi[ix, iy + 1])
        if a > b:
            a, b = b, a
        if math.isinf(a):
            return INF
        if b - a >= s:
            return a + s
        return 0.5 * (a + b + math.sqrt(2.0 * s * s - (b - a) ** 2))

    while heap:
        val, ix, iy = heapq.heappop(heap)
        if state[ix, iy] == 2 or val > psi[ix, iy]:
            continue
        state[ix, iy] = 2
        order.append((ix, iy))
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            jx, jy = ix + dx, iy + dy
            if not (0 <= jx < grid.nx and 0 <= jy < grid.ny):
                continue
            if state[jx, jy] == 2:
                continue
            cand = update(jx, jy)
            if cand < psi[jx, jy]:
                psi[jx, jy] = cand
                state[jx, jy] = 1
                heapq.heappush(heap, (cand, jx, jy))

    field = ScalarField(grid, psi)
    if return_order:
        return field, order
    return field
