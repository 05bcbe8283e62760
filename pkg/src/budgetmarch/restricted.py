"""Restricted value functions: cost J_i accumulated along u-optimal paths.

Given a converged governing value function u, each v_i satisfies

    v_i(x) = tau * K_i(x, a*) + v_i(x + tau * f(x, a*) * a*)

where a* minimizes the u-update at x.  Near-optimal directions (within a
small band of the optimum, including direct terminal jumps) are collected
once against u; the sweeps then select, per cost, the candidate minimizing
the v_i update, which realizes the lower semi-continuous selection.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from ._pack import build_pack
from .core import INF, ControlProblem, ScalarField
from .errors import SweepConvergenceError
from .static_solver import StaticSolveParams


def solve_restricted(
    problem: ControlProblem,
    u: ScalarField,
    governing_index: int,
    cost_indices,
    params: StaticSolveParams | None = None,
    tau: float | None = None,
    costs=None,
    terminals=None,
) -> list[ScalarField]:
    """v_i along u-optimal characteristics for each requested cost index.

    governing_index names the cost/terminal pair whose value function u is;
    it fixes the running cost in the argmin objective and the terminal data
    that u carries on the boundary.  costs/terminals default to the problem's
    lists; passing longer lists lets derived costs (weighted sums) govern.
    """
    params = params or StaticSolveParams()
    grid = problem.grid
    costs = list(costs) if costs is not None else list(problem.costs)
    terminals = list(terminals) if terminals is not None else list(problem.terminals)
    if len(costs) != len(terminals):
        raise ValueError("costs and terminals must pair up")
    pack = build_pack(grid, problem.speed, costs, terminals,
                      problem.obstacles)
    if tau is None:
        tau = params.tau if params.tau is not None else grid.h / problem.speed.max_speed(grid)

    nx, ny = grid.nx, grid.ny
    fixed = np.zeros((nx, ny), dtype=np.uint8)
    fixed[0, :] = fixed[-1, :] = 1
    fixed[:, 0] = fixed[:, -1] = 1
    obst = problem.obstacle_mask()
    fixed[obst] = 1
    gov_term = terminals[governing_index]
    for (ix, iy) in gov_term.entries:
        fixed[ix, iy] = 1

    finite = u.values[np.isfinite(u.values)]
    scale = float(np.abs(finite).max()) if finite.size else 1.0
    tol = params.sweep_tolerance_factor * max(scale, 1.0)
    band = 10.0 * tol

    maxc = _kernels.MAXC
    cand_kind = np.zeros((nx, ny, maxc), dtype=np.int64)
    cand_ang = np.zeros((nx, ny, maxc))
    cand_tau = np.zeros((nx, ny, maxc))
    cand_fx = np.zeros((nx, ny, maxc))
    cand_fy = np.zeros((nx, ny, maxc))
    cand_term = np.full((nx, ny, maxc), -1, dtype=np.int64)
    cand_n = np.zeros((nx, ny), dtype=np.int64)
    _kernels.collect_candidates(
        u.values, fixed, grid.h, tau, params.angle_samples,
        params.golden_tolerance, band,
        *pack.speed_args, governing_index, *pack.cost_args, pack.obs,
        pack.term_x, pack.term_y, np.ascontiguousarray(pack.term_q[:, governing_index]),
        cand_kind, cand_ang, cand_tau, cand_fx, cand_fy, cand_term, cand_n,
    )

    cost_idx = np.asarray(list(cost_indices), dtype=np.int64)
    V = np.full((len(cost_idx), nx, ny), INF)
    term_qi = np.full((len(cost_idx), max(1, pack.term_x.shape[0])), INF)
    for m, ci in enumerate(cost_idx):
        term = terminals[ci]
        for t in range(pack.term_x.shape[0]):
            term_qi[m, t] = term.q_at(pack.term_ix[t], pack.term_iy[t])
        # boundary data: v_i = q_i wherever u's terminal data admits an exit
        for (ix, iy), q_gov in gov_term.entries.items():
            if np.isfinite(q_gov):
                V[m, ix, iy] = term.q_at(ix, iy)

    last_change = INF
    for sweep in range(params.max_sweeps):
        order = (params.first_order + sweep) % 4
        last_change = _kernels.restricted_sweep(
            V, u.values, fixed, grid.h, order,
            *pack.speed_args, *pack.cost_args,
            cost_idx, cand_kind, cand_ang, cand_tau, cand_fx, cand_fy,
            cand_term, cand_n, term_qi,
        )
        vf = V[np.isfinite(V)]
        vscale = float(np.abs(vf).max()) if vf.size else 1.0
        vtol = params.sweep_tolerance_factor * max(vscale, 1.0)
        if last_change <= vtol:
            return [ScalarField(grid, V[m].copy()) for m in range(len(cost_idx))]
    residual = ScalarField(grid, np.full((nx, ny), last_change))
    raise SweepConvergenceError(
        f"restricted solve: no convergence after {params.max_sweeps} sweeps "
        f"(last max update {last_change:.3e})",
        residual,
    )
