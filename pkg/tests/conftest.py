import numpy as np
import pytest

from budgetmarch import (BudgetAxes, ConstantCost, ConstantSpeed,
                         ControlProblem, Grid2, TerminalCost)
from budgetmarch.augmented import build_mfl
from budgetmarch.convergence import build_problem as conv_problem
from budgetmarch.pipeline import solve_problem
from budgetmarch.restricted import solve_restricted
from budgetmarch.static_solver import solve_static

A1 = (0.0, 0.5)
A2 = (1.0, 0.5)


def unit_target_problem(n=81, B1=2.0, nb=81, target=(1.0, 1.0)):
    """f = 1, K_0 = K_1 = 1, single target: time equals pathlength."""
    grid = Grid2.square(n)
    return ControlProblem(
        grid=grid,
        speed=ConstantSpeed(1.0),
        costs=[ConstantCost(1.0), ConstantCost(1.0)],
        terminals=[TerminalCost.at_points(grid, [target], 0.0),
                   TerminalCost.at_points(grid, [target], 0.0)],
        budgets=BudgetAxes((B1,), (nb,)),
    )


@pytest.fixture(scope="session")
def conv100():
    """Convergence benchmark at h = db1 = 1/100, fully solved."""
    problem = conv_problem(1 / 100, 1 / 100)
    return solve_problem(problem)


@pytest.fixture(scope="session")
def conv_coarse():
    """Convergence benchmark at h = 1/80, db1 = 1/20 (multi-cell walks)."""
    problem = conv_problem(1 / 80, 1 / 20)
    u0 = solve_static(problem, 0)
    u1 = solve_static(problem, 1)
    (v01,) = solve_restricted(problem, u1, 1, [0])
    (v10,) = solve_restricted(problem, u0, 0, [1])
    mfl = build_mfl(problem, [u0, u1], {(0, 1): v01})
    return problem, u0, u1, v01, v10, mfl


@pytest.fixture(scope="session")
def unit81():
    """Unit-speed single-target problem, fully solved."""
    problem = unit_target_problem()
    return solve_problem(problem)


@pytest.fixture(scope="session")
def tvl101():
    """time-vs-length at h = db1 = 1/100 (criterion-6 resolution)."""
    from budgetmarch import load_scenario

    scen = load_scenario("time-vs-length",
                         {"grid.n": 101, "budgets.counts": [141]})
    return scen, solve_problem(scen.problem, scen.march)


@pytest.fixture(scope="session")
def weather101():
    from budgetmarch import load_scenario

    scen = load_scenario("weather", {"grid.n": 101, "budgets.counts": [201]})
    return scen, solve_problem(scen.problem, scen.march)


@pytest.fixture(scope="session")
def aniso81():
    from budgetmarch import load_scenario

    scen = load_scenario("anisotropic", {"grid.n": 81, "budgets.counts": [121]})
    return scen, solve_problem(scen.problem, scen.march)


@pytest.fixture(scope="session")
def avoid101():
    from budgetmarch import load_scenario

    scen = load_scenario("avoid-observer",
                         {"grid.n": 101, "budgets.counts": [126]})
    return scen, solve_problem(scen.problem, scen.march)


@pytest.fixture(scope="session")
def r2small():
    from budgetmarch import load_scenario

    scen = load_scenario("two-constraints",
                         {"grid.n": 41, "budgets.counts": [41, 41]})
    return scen, solve_problem(scen.problem, scen.march)


def finite_interior(values):
    mask = np.zeros(values.shape, dtype=bool)
    mask[1:-1, 1:-1] = np.isfinite(values[1:-1, 1:-1])
    return mask
