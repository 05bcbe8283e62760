"""Minimal Feasible Level and the budget-augmented value function W.

The extended state is (x, b_1[, b_2]); W is stored as ordered b_1-slices and
filled by explicit marching in ascending b_1 (Algorithm 1: tau_a = db_1/K_1
so every foot lands in the previous slice; Algorithms 2/3: piecewise ray
walks with coefficient re-evaluation, Algorithm 3 stopping at the first face
whose corners are already finalized in lexicographic within-slice order).

Initialization supplies the inflow data: +inf below the (conservatively
snapped) MFL, the restricted cost on the MFL itself, u_0 wherever the
primary-optimal control is already feasible (b_i >= v_i0), and the terminal
columns.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._pack import build_pack
from .core import INF, BudgetAxes, ControlProblem, Grid2, ScalarField
from .errors import TraversalLimitError, ValidationError

# internal code values per extended gridpoint
CODE_MARCH = 0
CODE_BELOW_MFL = 1
CODE_CAP = 2
CODE_MFL_ROW = 3
CODE_FIXED = 4  # terminal columns, spatial boundary, obstacles

# public mask tags (three-way exclusion view)
MASK_ACTIVE = 0
MASK_BELOW_MFL = 1
MASK_CAP = 2


@dataclass
class MflSurface:
    """Per-(x[, b_2]) minimal feasible b_1 level with the W value on it."""

    level: np.ndarray
    value_on_mfl: np.ndarray
    snapped_index: np.ndarray
    budgets: BudgetAxes

    @property
    def r(self) -> int:
        return self.budgets.r


@dataclass
class MarchParams:
    algorithm: int = 1
    angle_samples: int = 8
    golden_tolerance: float = 1e-6
    max_cells_traversed: int | None = None  # default 8*(N1+nx+ny)
    streaming: bool = False
    # feasible control sets nest in b, so the previous slice bounds W from
    # above; taking that bound closes the rare +inf pockets the conservative
    # interpolation leaves just above the snapped MFL
    monotone_completion: bool = True

    def __post_init__(self):
        if self.algorithm not in (1, 2, 3):
            raise ValidationError("algorithm must be 1, 2 or 3")
        if self.angle_samples < 3:
            raise ValidationError("need at least 3 angle brackets")


@dataclass
class MarchStats:
    slices: int = 0
    updates: int = 0
    cells_traversed: int = 0
    seconds: float = 0.0


class AugmentedField:
    """W on the extended grid, stored as ordered b_1-slices, plus the mask."""

    def __init__(self, grid: Grid2, budgets: BudgetAxes, values: np.ndarray,
                 codes: np.ndarray, stats: MarchStats | None = None):
        self.grid = grid
        self.budgets = budgets
        self.values = values
        self.codes = codes
        self.stats = stats or MarchStats()

    @property
    def r(self) -> int:
        return self.budgets.r

    @property
    def hat_h(self) -> float:
        return self.budgets.hat_h(self.grid)

    @property
    def excluded_mask(self) -> np.ndarray:
        mask = np.zeros_like(self.codes)
        mask[self.codes == CODE_BELOW_MFL] = MASK_BELOW_MFL
        mask[self.codes == CODE_CAP] = MASK_CAP
        return mask

    def slice(self, j: int) -> np.ndarray:
        return self.values[j]

    def value_at(self, start, b) -> float:
        """Multilinear interpolation of W at position start and budgets b."""
        x, y = float(start[0]), float(start[1])
        if self.r == 1:
            b1 = float(b[0]) if np.ndim(b) else float(b)
            return float(_kernels.interp_w3(
                self.values, self.grid.h, self.budgets.deltas[0], x, y, b1))
        b1, b2 = float(b[0]), float(b[1])
        return float(_kernels.interp_w4(
            self.values, self.grid.h, self.budgets.deltas[0],
            self.budgets.deltas[1], x, y, b1, b2))


def snap_indices(level: np.ndarray, db1: float, n1: int) -> np.ndarray:
    """Smallest slice index i with level <= i*db1 (n1 marks infeasible)."""
    with np.errstate(invalid="ignore"):
        idx = np.ceil(level / db1 - 1e-9)
    idx = np.where(np.isfinite(level), idx, n1)
    idx = np.clip(idx, 0, None)
    idx = np.where(idx >= n1, n1, idx)
    return idx.astype(np.int64)


def build_mfl(problem: ControlProblem, u_list, v, params: MarchParams | None = None) -> MflSurface:
    """Feasibility surface of the augmented problem.

    For r = 1 the MFL is the graph of u_1 and carries v_01.  For r = 2 the
    level w_1(x, b_2) is itself a one-constraint augmented solve (primary
    cost K_1, secondary K_2) whose companion field integrates K_0 along the
    same characteristics.

    u_list[i] is u_i; v[(i, j)] is cost i along j-optimal characteristics.
    """
    params = params or MarchParams()
    n1 = problem.budgets.counts[0]
    db1 = problem.budgets.deltas[0]
    if problem.r == 1:
        level = u_list[1].values.copy()
        value = v[(0, 1)].values.copy()
        # the cap bounds the feasibility level: the primary-optimal control
        # realizes (u_0, v_10), so the level never exceeds v_10
        if (1, 0) in v:
            v10 = v[(1, 0)].values
            u0 = u_list[0].values
            clamp = np.isfinite(v10) & (v10 < level)
            level[clamp] = v10[clamp]
            value[clamp] = np.minimum(
                np.where(np.isfinite(value), value, np.inf), u0)[clamp]
        return MflSurface(level, value, snap_indices(level, db1, n1), problem.budgets)

    # r = 2: recursive one-constraint solve for w_1 with the K_0 passenger
    sub = ControlProblem(
        grid=problem.grid,
        speed=problem.speed,
        costs=[problem.costs[1], problem.costs[2]],
        terminals=[problem.terminals[1], problem.terminals[2]],
        budgets=BudgetAxes((problem.budgets.bounds[1],), (problem.budgets.counts[1],)),
        obstacles=problem.obstacles,
    )
    sub_costs = [problem.costs[1], problem.costs[2], problem.costs[0]]
    sub_terminals = [problem.terminals[1], problem.terminals[2], problem.terminals[0]]
    sub_mfl = MflSurface(
        level=u_list[2].values.copy(),
        value_on_mfl=v[(1, 2)].values.copy(),
        snapped_index=snap_indices(u_list[2].values, sub.budgets.deltas[0],
                                   sub.budgets.counts[0]),
        budgets=sub.budgets,
    )
    w1 = _march_r1(
        sub, sub_mfl, u0=u_list[1], cap_levels=[v[(2, 1)]],
        params=MarchParams(algorithm=params.algorithm,
                           angle_samples=params.angle_samples,
                           golden_tolerance=params.golden_tolerance,
                           max_cells_traversed=params.max_cells_traversed,
                           monotone_completion=params.monotone_completion),
        passenger=(2, v[(0, 2)], v[(0, 1)]),
        costs=sub_costs, terminals=sub_terminals,
    )
    w1_field, passenger = w1
    level = w1_field.values.copy()  # (N2, nx, ny): minimal feasible b_1
    value = passenger.copy()
    if (1, 0) in v and (2, 0) in v:
        # where the second budget admits the primary-optimal control, the
        # level is bounded by v_10 and carries w = u_0 there exactly
        v10 = v[(1, 0)].values
        v20 = v[(2, 0)].values
        u0 = u_list[0].values
        db2 = problem.budgets.deltas[1]
        for k in range(problem.budgets.counts[1]):
            ok2 = np.isfinite(v20) & (k * db2 >= v20 - 1e-12)
            clamp = ok2 & np.isfinite(v10) & (v10 < level[k])
            level[k][clamp] = v10[clamp]
            value[k][clamp] = np.minimum(
                np.where(np.isfinite(value[k]), value[k], np.inf), u0)[clamp]
    return MflSurface(level, value, snap_indices(level, db1, n1),
                      problem.budgets)


def _init_codes_r1(problem, mfl, u0, v10, j, fixed_cache):
    """Codes and preset values for b_1-slice j (r = 1)."""
    grid = problem.grid
    nx, ny = grid.nx, grid.ny
    db1 = problem.budgets.deltas[0]
    b1 = j * db1
    code = np.zeros((nx, ny), dtype=np.uint8)
    W = np.full((nx, ny), INF)

    below = j < mfl.snapped_index
    code[below] = CODE_BELOW_MFL
    on_row = (j == mfl.snapped_index) & np.isfinite(mfl.value_on_mfl)
    code[on_row] = CODE_MFL_ROW
    W[on_row] = mfl.value_on_mfl[on_row]
    capped = b1 >= v10.values - 1e-12
    capped &= np.isfinite(u0.values)
    code[capped] = CODE_CAP
    W[capped] = u0.values[capped]

    fixed, term_entries = fixed_cache
    code[fixed] = CODE_FIXED
    W[fixed] = INF
    for (ix, iy, q0, q1) in term_entries:
        if b1 >= q1 - 1e-9:
            W[ix, iy] = q0
    return code, W


def _fixed_and_q_r1(problem, terminals=None):
    """Fixed gridpoints (boundary, terminals, obstacles) and the exit data."""
    grid = problem.grid
    nx, ny = grid.nx, grid.ny
    fixed = np.zeros((nx, ny), dtype=bool)
    fixed[0, :] = fixed[-1, :] = True
    fixed[:, 0] = fixed[:, -1] = True
    obst = problem.obstacle_mask()
    fixed |= obst
    terminals = terminals if terminals is not None else problem.terminals
    term0 = terminals[0]
    term1 = terminals[1]
    entries = []
    for (ix, iy), q0 in term0.entries.items():
        fixed[ix, iy] = True
        if np.isfinite(q0) and not obst[ix, iy]:
            entries.append((ix, iy, q0, term1.q_at(ix, iy)))
    return fixed, entries


def _march_r1(problem, mfl, u0, cap_levels, params, passenger=None,
              on_slice=None, collect=True, costs=None, terminals=None):
    """Algorithm-1/2/3 marching for one secondary cost.

    passenger = (cost_index, value_on_mfl_field, cap_value_field) advances a
    companion cost along the same characteristics (used for the r = 2 MFL);
    costs/terminals may extend the problem's lists with the passenger pair.
    Returns (AugmentedField, passenger_array | None) when collect, else stats.
    """
    grid = problem.grid
    nx, ny = grid.nx, grid.ny
    n1 = problem.budgets.counts[0]
    db1 = problem.budgets.deltas[0]
    v10 = cap_levels[0]
    costs = list(costs) if costs is not None else list(problem.costs)
    terminals = list(terminals) if terminals is not None else list(problem.terminals)
    pack = build_pack(grid, problem.speed, costs, terminals,
                      problem.obstacles)
    max_cells = params.max_cells_traversed or 8 * (n1 + nx + ny)
    stats = MarchStats()
    t_start = time.perf_counter()

    q_cache = _fixed_and_q_r1(problem, terminals)
    use_passenger = passenger is not None
    if use_passenger:
        pci, p_on_mfl, p_cap = passenger
        P = np.full((n1, nx, ny), INF) if collect else None
        Pprev = np.full((nx, ny), INF)
        Pcur = np.full((nx, ny), INF)
    else:
        pci = 0
        Pprev = np.zeros((1, 1))
        Pcur = np.zeros((1, 1))

    values = np.full((n1, nx, ny), INF) if collect else None
    codes = np.zeros((n1, nx, ny), dtype=np.uint8) if collect else None
    Wprev = np.full((nx, ny), INF)
    Wcur = np.full((nx, ny), INF)
    err = np.zeros(4)

    for j in range(n1):
        code, W = _init_codes_r1(problem, mfl, u0, v10, j, q_cache)
        Wcur = W
        if use_passenger:
            Pc = np.full((nx, ny), INF)
            on_row = code == CODE_MFL_ROW
            Pc[on_row] = p_on_mfl.values[on_row]
            capped = code == CODE_CAP
            Pc[capped] = p_cap.values[capped]
            fixedm = code == CODE_FIXED
            # passenger terminal columns carry the passenger exit cost
            Pq = np.full((nx, ny), INF)
            for t in range(pack.term_x.shape[0]):
                ix, iy = pack.term_ix[t], pack.term_iy[t]
                if np.isfinite(Wcur[ix, iy]):
                    Pq[ix, iy] = pack.term_q[t, pci]
            Pc[fixedm] = Pq[fixedm]
            Pcur = Pc
        if j > 0:
            active = int((code == CODE_MARCH).sum())
            stats.updates += active
            if active:
                if params.algorithm == 1:
                    if use_passenger:
                        fin = Wprev[np.isfinite(Wprev)]
                        band = 1e-8 * max(1.0, float(np.abs(fin).max()) if fin.size else 1.0)
                        _kernels.march_slice_alg1_r1_passenger(
                            Wprev, Wcur, code, grid.h, j * db1, db1,
                            params.angle_samples, params.golden_tolerance,
                            *pack.speed_args, *pack.cost_args, pack.obs,
                            pack.term_x, pack.term_y,
                            np.ascontiguousarray(pack.term_q),
                            Pprev, Pcur, pci, band,
                            1 if params.monotone_completion else 0,
                        )
                    else:
                        _kernels.march_slice_alg1_r1(
                            Wprev, Wcur, code, grid.h, j * db1, db1,
                            params.angle_samples, params.golden_tolerance,
                            *pack.speed_args, *pack.cost_args, pack.obs,
                            pack.term_x, pack.term_y,
                            np.ascontiguousarray(pack.term_q),
                            1 if params.monotone_completion else 0,
                        )
                else:
                    final = (code != CODE_MARCH).astype(np.uint8)
                    cells = _kernels.march_slice_walk_r1(
                        Wprev, Wcur, code, final, grid.h, j * db1, db1,
                        params.algorithm, max_cells, params.angle_samples,
                        params.golden_tolerance,
                        *pack.speed_args, *pack.cost_args, pack.obs,
                        pack.term_x, pack.term_y,
                        np.ascontiguousarray(pack.term_q), err,
                        1 if params.monotone_completion else 0,
                        Pprev, Pcur, pci, use_passenger,
                    )
                    stats.cells_traversed += int(cells)
                    if err[0] != 0.0:
                        raise TraversalLimitError(
                            f"ray walk exceeded {max_cells} cells",
                            gridpoint=(int(err[1]), int(err[2])),
                            angle=float(err[3]),
                        )
        else:
            # slice 0 has no predecessor; unassigned points stay +inf
            Wcur[code == CODE_MARCH] = INF
        if collect:
            values[j] = Wcur
            codes[j] = code
            if use_passenger:
                P[j] = Pcur
        if on_slice is not None:
            on_slice(j, Wcur)
        Wprev = Wcur
        if use_passenger:
            Pprev = Pcur
        stats.slices += 1

    stats.seconds = time.perf_counter() - t_start
    if not collect:
        return stats
    fld = AugmentedField(grid, problem.budgets, values, codes, stats)
    if use_passenger:
        return fld, P
    return fld


def _fixed_and_q_r2(problem):
    grid = problem.grid
    nx, ny = grid.nx, grid.ny
    n1, n2 = problem.budgets.counts
    db1, db2 = problem.budgets.deltas
    fixed = np.zeros((nx, ny), dtype=bool)
    fixed[0, :] = fixed[-1, :] = True
    fixed[:, 0] = fixed[:, -1] = True
    obst = problem.obstacle_mask()
    fixed |= obst
    term0, term1, term2 = problem.terminals
    entries = []
    for (ix, iy), q0 in term0.entries.items():
        fixed[ix, iy] = True
        if np.isfinite(q0) and not obst[ix, iy]:
            entries.append((ix, iy, q0, term1.q_at(ix, iy), term2.q_at(ix, iy)))
    return fixed, entries


def _init_codes_r2(problem, mfl, u0, v10, v20, j, fixed, term_entries):
    grid = problem.grid
    nx, ny = grid.nx, grid.ny
    n2 = problem.budgets.counts[1]
    db1, db2 = problem.budgets.deltas
    b1 = j * db1
    code = np.zeros((n2, nx, ny), dtype=np.uint8)
    W = np.full((n2, nx, ny), INF)

    below = j < mfl.snapped_index
    code[below] = CODE_BELOW_MFL
    on_row = (j == mfl.snapped_index) & np.isfinite(mfl.value_on_mfl)
    code[on_row] = CODE_MFL_ROW
    W[on_row] = mfl.value_on_mfl[on_row]
    b2s = np.linspace(0.0, problem.budgets.bounds[1], n2)
    capped1 = b1 >= v10.values - 1e-12
    for k in range(n2):
        capped = capped1 & (b2s[k] >= v20.values - 1e-12) & np.isfinite(u0.values)
        code[k][capped] = CODE_CAP
        W[k][capped] = u0.values[capped]
    code[:, fixed] = CODE_FIXED
    W[:, fixed] = INF
    for (ix, iy, q0, q1, q2) in term_entries:
        for k in range(n2):
            if b1 >= q1 - 1e-9 and k * db2 >= q2 - 1e-9:
                W[k, ix, iy] = q0
    return code, W


def _march_r2(problem, mfl, u0, cap_levels, params, on_slice=None, collect=True):
    grid = problem.grid
    nx, ny = grid.nx, grid.ny
    n1, n2 = problem.budgets.counts
    db1, db2 = problem.budgets.deltas
    v10, v20 = cap_levels
    pack = build_pack(grid, problem.speed, problem.costs, problem.terminals,
                      problem.obstacles)
    max_cells = params.max_cells_traversed or 8 * (n1 + n2 + nx + ny)
    stats = MarchStats()
    t_start = time.perf_counter()

    fixed, term_entries = _fixed_and_q_r2(problem)
    values = np.full((n1, n2, nx, ny), INF) if collect else None
    codes = np.zeros((n1, n2, nx, ny), dtype=np.uint8) if collect else None
    Wprev = np.full((n2, nx, ny), INF)
    err = np.zeros(4)

    for j in range(n1):
        code, Wcur = _init_codes_r2(problem, mfl, u0, v10, v20, j, fixed,
                                    term_entries)
        if j > 0:
            active = int((code == CODE_MARCH).sum())
            stats.updates += active
            if active:
                if params.algorithm == 1:
                    _kernels.march_slice_alg1_r2(
                        Wprev, Wcur, code, grid.h, j * db1, db1, db2,
                        params.angle_samples, params.golden_tolerance,
                        *pack.speed_args, *pack.cost_args, pack.obs,
                        pack.term_x, pack.term_y,
                        np.ascontiguousarray(pack.term_q),
                        1 if params.monotone_completion else 0,
                    )
                else:
                    final = (code != CODE_MARCH).astype(np.uint8)
                    cells = _kernels.march_slice_walk_r2(
                        Wprev, Wcur, code, final, grid.h, j * db1, db1, db2,
                        params.algorithm, max_cells, params.angle_samples,
                        params.golden_tolerance,
                        *pack.speed_args, *pack.cost_args, pack.obs,
                        pack.term_x, pack.term_y,
                        np.ascontiguousarray(pack.term_q), err,
                        1 if params.monotone_completion else 0,
                    )
                    stats.cells_traversed += int(cells)
                    if err[0] != 0.0:
                        raise TraversalLimitError(
                            f"ray walk exceeded {max_cells} cells",
                            gridpoint=(int(err[1]), int(err[2])),
                            angle=float(err[3]),
                        )
        else:
            Wcur[code == CODE_MARCH] = INF
        if params.monotone_completion:
            # nesting also holds along b_2: lower-b_2 values bound from above
            # (applies at marched and MFL-row points; the cap stays exactly
            # u_0 and the feasibility floor stays +inf)
            adjustable = (code == CODE_MARCH) | (code == CODE_MFL_ROW)
            for k in range(1, n2):
                better = adjustable[k] & (Wcur[k - 1] < Wcur[k])
                Wcur[k][better] = Wcur[k - 1][better]
        if collect:
            values[j] = Wcur
            codes[j] = code
        if on_slice is not None:
            on_slice(j, Wcur)
        Wprev = Wcur
        stats.slices += 1

    stats.seconds = time.perf_counter() - t_start
    if not collect:
        return stats
    return AugmentedField(grid, problem.budgets, values, codes, stats)


def march_augmented(problem: ControlProblem, mfl: MflSurface, u0: ScalarField,
                    cap_levels, params: MarchParams | None = None,
                    on_slice=None):
    """March W over the extended state space in ascending b_1.

    cap_levels = [v_10] (r = 1) or [v_10, v_20]; points with b_i >= v_i0 for
    every i are assigned u_0 directly.  With params.streaming (Algorithm 1
    only) the full field is not retained: each finished slice is passed to
    on_slice and MarchStats is returned.
    """
    params = params or MarchParams()
    if mfl is None:
        raise ValidationError("march requires a built MFL")
    if params.streaming and params.algorithm != 1:
        raise ValidationError(
            "streaming mode requires Algorithm 1 (single-slice dependency)")
    floor = problem.budgets.counts[0] + problem.grid.nx + problem.grid.ny
    if params.max_cells_traversed is not None and params.max_cells_traversed < floor:
        raise ValidationError(
            f"max_cells_traversed must be at least N_1 + nx + ny = {floor}")
    if problem.r == 1:
        return _march_r1(problem, mfl, u0, cap_levels, params,
                         on_slice=on_slice, collect=not params.streaming)
    return _march_r2(problem, mfl, u0, cap_levels, params,
                     on_slice=on_slice, collect=not params.streaming)


def march_one_slice(problem: ControlProblem, fld: AugmentedField, j: int,
                    mfl: MflSurface, u0: ScalarField, cap_levels,
                    params: MarchParams | None = None) -> np.ndarray:
    """Recompute slice j from slice j-1 of a finished field (purity check)."""
    params = params or MarchParams()
    if j < 1:
        raise ValidationError("slice 0 has no predecessor")
    grid = problem.grid
    pack = build_pack(grid, problem.speed, problem.costs, problem.terminals,
                      problem.obstacles)
    db1 = problem.budgets.deltas[0]
    if problem.r != 1:
        raise ValidationError("slice recomputation implemented for r = 1")
    q_cache = _fixed_and_q_r1(problem)
    code, Wcur = _init_codes_r1(problem, mfl, u0, cap_levels[0], j, q_cache)
    Wprev = np.ascontiguousarray(fld.values[j - 1])
    if params.algorithm == 1:
        _kernels.march_slice_alg1_r1(
            Wprev, Wcur, code, grid.h, j * db1, db1,
            params.angle_samples, params.golden_tolerance,
            *pack.speed_args, *pack.cost_args, pack.obs,
            pack.term_x, pack.term_y, np.ascontiguousarray(pack.term_q),
            1 if params.monotone_completion else 0,
        )
    else:
        final = (code != CODE_MARCH).astype(np.uint8)
        err = np.zeros(4)
        _kernels.march_slice_walk_r1(
            Wprev, Wcur, code, final, grid.h, j * db1, db1,
            params.algorithm,
            params.max_cells_traversed or 8 * (problem.budgets.counts[0] + grid.nx + grid.ny),
            params.angle_samples, params.golden_tolerance,
            *pack.speed_args, *pack.cost_args, pack.obs,
            pack.term_x, pack.term_y, np.ascontiguousarray(pack.term_q), err,
            1 if params.monotone_completion else 0,
            np.zeros((1, 1)), np.zeros((1, 1)), 0, False,
        )
    return Wcur


@dataclass
class ReductionReport:
    """Domain-reduction percentages (mask counts plus the ratio formulas)."""

    cap_pct_of_domain: float
    mfl_pct_of_remaining: float
    formula_cap_pct: float | None = None
    formula_mfl_pct: float | None = None

    def __str__(self):
        s = (f"cap excludes {self.cap_pct_of_domain:.1f}% of the extended grid; "
             f"MFL excludes {self.mfl_pct_of_remaining:.1f}% of the remainder")
        if self.formula_mfl_pct is not None:
            s += (f" (ratio formulas: cap {self.formula_cap_pct:.1f}%, "
                  f"MFL {self.formula_mfl_pct:.1f}%)")
        return s


def domain_reduction_report(fld: AugmentedField, u1: ScalarField | None = None,
                            v10: ScalarField | None = None,
                            obstacle_mask: np.ndarray | None = None) -> ReductionReport:
    """Excluded-point percentages, and the averaged ratio formulas when the
    r = 1 ingredient fields are supplied."""
    codes = fld.codes
    total = codes.size
    n_cap = int((codes == CODE_CAP).sum())
    n_below = int((codes == CODE_BELOW_MFL).sum())
    remaining = total - n_cap
    cap_pct = 100.0 * n_cap / total
    mfl_pct = 100.0 * n_below / remaining if remaining else 0.0

    f_cap = f_mfl = None
    if u1 is not None and v10 is not None and fld.r == 1:
        B1 = fld.budgets.bounds[0]
        u1v = u1.values
        v10v = v10.values
        sel = np.ones(u1v.shape, dtype=bool)
        if obstacle_mask is not None:
            sel &= ~obstacle_mask
        with np.errstate(invalid="ignore"):
            cap_ratio = np.where(np.isfinite(v10v), np.maximum(B1 - v10v, 0.0) / B1, 0.0)
            num = np.minimum(B1, np.where(np.isfinite(u1v), u1v, B1))
            den = np.minimum(B1, np.where(np.isfinite(v10v), v10v, B1))
            mfl_ratio = np.where(den > 0, num / np.maximum(den, 1e-300), 1.0)
        f_cap = 100.0 * float(cap_ratio[sel].mean())
        f_mfl = 100.0 * float(np.minimum(mfl_ratio, 1.0)[sel].mean())
    return ReductionReport(cap_pct, mfl_pct, f_cap, f_mfl)
