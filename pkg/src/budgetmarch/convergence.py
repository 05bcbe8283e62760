"""The two-exit analytic benchmark and its error tables.

Exits A1 = (0, 0.5) with exit penalty 1.5 and A2 = (1, 0.5); unit speed and
unit running costs make the secondary cost the pathlength, every optimal
trajectory a straight segment, and the augmented value function available in
closed form:

    w(x, b) = |x - A2|        if |x - A2| <= b
            = |x - A1| + 1.5  if |x - A1| <= b < |x - A2|
            = +inf            otherwise
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .augmented import MarchParams
from .core import (BudgetAxes, ConstantCost, ConstantSpeed, ControlProblem,
                   Grid2, TerminalCost)
from .pipeline import solve_problem

A1 = (0.0, 0.5)
A2 = (1.0, 0.5)
EXIT_PENALTY = 1.5


def parse_spacing(text: str) -> float:
    """Spacing given as '1/160' or a decimal."""
    return float(Fraction(text))


def build_problem(h: float, db1: float, B1: float = 1.0) -> ControlProblem:
    n = int(round(1.0 / h)) + 1
    nb = int(round(B1 / db1)) + 1
    grid = Grid2.square(n)
    return ControlProblem(
        grid=grid,
        speed=ConstantSpeed(1.0),
        costs=[ConstantCost(1.0), ConstantCost(1.0)],
        terminals=[
            TerminalCost.at_points(grid, [A1, A2], [EXIT_PENALTY, 0.0]),
            TerminalCost.at_points(grid, [A1, A2], [0.0, 0.0]),
        ],
        budgets=BudgetAxes((B1,), (nb,)),
    )


def analytic_w(problem: ControlProblem) -> np.ndarray:
    grid = problem.grid
    xs, ys = grid.meshgrid()
    d1 = np.hypot(xs - A1[0], ys - A1[1])
    d2 = np.hypot(xs - A2[0], ys - A2[1])
    n1 = problem.budgets.counts[0]
    W = np.empty((n1, grid.nx, grid.ny))
    for j, b in enumerate(problem.budgets.values(0)):
        W[j] = np.where(d2 <= b, d2, np.where(d1 <= b, d1 + EXIT_PENALTY, np.inf))
    return W


def _interior(problem: ControlProblem) -> np.ndarray:
    m = np.zeros((problem.grid.nx, problem.grid.ny), dtype=bool)
    m[1:-1, 1:-1] = True
    return m


def l1_error(W: np.ndarray, exact: np.ndarray, problem: ControlProblem) -> float:
    """Mean |W - w| over interior gridpoints where both are finite."""
    both = np.isfinite(W) & np.isfinite(exact) & _interior(problem)[None, :, :]
    return float(np.abs(W[both] - exact[both]).mean())


def linf_error(W: np.ndarray, exact: np.ndarray, problem: ControlProblem) -> float:
    """Max |W - w| over points at least 1.5*db1 from the slice discontinuities.

    The discontinuity set of each b-slice is the circle |x - A2| = b plus the
    arc |x - A1| = b on the side where only the A1 exit is feasible.
    """
    grid = problem.grid
    db1 = problem.budgets.deltas[0]
    xs, ys = grid.meshgrid()
    d1 = np.hypot(xs - A1[0], ys - A1[1])
    d2 = np.hypot(xs - A2[0], ys - A2[1])
    inner = _interior(problem)
    worst = 0.0
    for j, b in enumerate(problem.budgets.values(0)):
        dist = np.abs(d2 - b)
        on_a1_arc = d2 > b
        dist = np.where(on_a1_arc, np.minimum(dist, np.abs(d1 - b)), dist)
        sel = (dist >= 1.5 * db1) & np.isfinite(exact[j]) & inner
        if not sel.any():
            continue
        diff = np.abs(W[j][sel] - exact[j][sel])
        diff = np.where(np.isnan(diff), np.inf, diff)
        worst = max(worst, float(diff.max()))
    return worst


@dataclass
class ConvergenceRow:
    h: float
    db1: float
    l1: float
    linf: float
    seconds: float


def convergence_row(h: float, db1: float, B1: float = 1.0,
                    march_params: MarchParams | None = None) -> ConvergenceRow:
    import time

    from .static_solver import StaticSolveParams

    t0 = time.perf_counter()
    problem = build_problem(h, db1, B1)
    # constant coefficients: a two-cell step halves the number of
    # interpolations without any coefficient-freezing error
    statics = StaticSolveParams(tau=2 * h)
    result = solve_problem(problem, march_params, statics)
    exact = analytic_w(problem)
    W = result.field.values
    row = ConvergenceRow(h, db1, l1_error(W, exact, problem),
                         linf_error(W, exact, problem),
                         time.perf_counter() - t0)
    return row


def convergence_table(hs, dbs, B1: float = 1.0,
                      march_params: MarchParams | None = None):
    return [convergence_row(h, db, B1, march_params) for db in dbs for h in hs]
