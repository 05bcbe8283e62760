import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from budgetmarch import (INF, BudgetAxes, ConstantCost, ConstantSpeed,
                         ControlProblem, EllipticSpeed, Grid2, RegionCost,
                         Rect, ScalarField, TerminalCost,
                         eval_anisotropic_speed, integrate_costs,
                         interpolate_bilinear, validate_problem)
from budgetmarch.errors import OutOfDomainError, ValidationError


def test_grid_invariants():
    g = Grid2.square(41)
    assert g.h == pytest.approx(1 / 40)
    with pytest.raises(ValidationError):
        Grid2(1, 1)
    with pytest.raises(ValidationError):
        Grid2(41, 31)


def test_budget_axes():
    b = BudgetAxes((2.0, 1.0), (21, 11))
    assert b.r == 2
    assert b.deltas == (0.1, 0.1)
    assert b.hat_h(Grid2.square(5)) == 0.25
    with pytest.raises(ValidationError):
        BudgetAxes((1.0,), (1,))
    with pytest.raises(ValidationError):
        BudgetAxes((-1.0,), (11,))
    with pytest.raises(ValidationError):
        BudgetAxes((1.0, 1.0, 1.0), (5, 5, 5))


def test_interpolation_constant_and_linear():
    g = Grid2.square(5)
    const = ScalarField.full(g, 3.0)
    assert interpolate_bilinear(const, (0.3, 0.6)) == pytest.approx(3.0)
    linear = ScalarField.from_function(g, lambda x, y: x)
    assert interpolate_bilinear(linear, (0.125, 0.3)) == pytest.approx(0.125)


def test_interpolation_inf_corner_propagates():
    g = Grid2.square(3)
    f = ScalarField.full(g, 1.0)
    f.values[1, 1] = INF
    # strictly inside a cell touching the inf corner
    assert interpolate_bilinear(f, (0.3, 0.3)) == INF
    # on the far edge of the adjacent cell the inf corner has zero weight
    assert np.isfinite(interpolate_bilinear(f, (0.25, 0.0)))


def test_interpolation_out_of_domain():
    g = Grid2.square(3)
    f = ScalarField.full(g, 0.0)
    with pytest.raises(OutOfDomainError):
        interpolate_bilinear(f, (1.2, 0.5))


@given(st.floats(0, 1), st.floats(0, 1), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(-3, 3))
@settings(max_examples=60, deadline=None)
def test_interpolation_affine_exact(px, py, a, b, c):
    g = Grid2.square(9)
    f = ScalarField.from_function(g, lambda x, y: a * x + b * y + c)
    expect = a * px + b * py + c
    assert interpolate_bilinear(f, (px, py)) == pytest.approx(expect, abs=1e-12)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 10 ** 6))
@settings(max_examples=60, deadline=None)
def test_interpolation_within_corner_range(px, py, seed):
    rng = np.random.default_rng(seed)
    g = Grid2.square(6)
    f = ScalarField(g, rng.uniform(0, 5, size=(6, 6)))
    v = interpolate_bilinear(f, (px, py))
    assert f.values.min() - 1e-12 <= v <= f.values.max() + 1e-12


def test_anisotropic_speed_axes():
    model = EllipticSpeed(0.2, 0.8, 0.1225, 4 * math.pi)
    x = (0.3, 0.5)
    dc = 0.1225 * 4 * math.pi * math.cos(4 * math.pi * x[0])
    tangent = np.array([1.0, dc]) / math.hypot(1.0, dc)
    normal = np.array([-dc, 1.0]) / math.hypot(1.0, dc)
    assert eval_anisotropic_speed(model, x, tangent) == pytest.approx(0.8)
    assert eval_anisotropic_speed(model, x, normal) == pytest.approx(0.2)
    flat = EllipticSpeed(0.7, 0.7, 0.1225, 4 * math.pi)
    for ang in np.linspace(0, 2 * math.pi, 9):
        a = (math.cos(ang), math.sin(ang))
        assert eval_anisotropic_speed(flat, x, a) == pytest.approx(0.7)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 2 * math.pi))
@settings(max_examples=80, deadline=None)
def test_anisotropic_speed_range(x, y, ang):
    model = EllipticSpeed(0.2, 0.8, 0.1225, 4 * math.pi)
    v = eval_anisotropic_speed(model, (x, y), (math.cos(ang), math.sin(ang)))
    assert 0.2 - 1e-12 <= v <= 0.8 + 1e-12


def test_anisotropic_speed_rejects_non_unit():
    model = EllipticSpeed(0.2, 0.8, 0.1225, 4 * math.pi)
    with pytest.raises(ValidationError):
        eval_anisotropic_speed(model, (0.5, 0.5), (1.0, 1.0))


def _problem(cost0=None, cost1=None, term_value=0.0):
    g = Grid2.square(21)
    return ControlProblem(
        grid=g,
        speed=ConstantSpeed(1.0),
        costs=[cost0 or ConstantCost(1.0), cost1 or ConstantCost(1.0)],
        terminals=[TerminalCost.at_points(g, [(1, 1)], term_value)] * 2,
        budgets=BudgetAxes((1.0,), (11,)),
    )


def test_validate_all_pass():
    report = validate_problem(_problem())
    assert report.ok, str(report)


def test_validate_a2_violation():
    bad = RegionCost(1.0, [(Rect(0.2, 0.4, 0.2, 0.4), 0.0)])
    report = validate_problem(_problem(cost1=bad))
    failing = [c.name for c in report.failures()]
    assert "A2 cost 1" in failing


def test_validate_a0_violation():
    report = validate_problem(_problem(term_value=INF))
    failing = [c.name for c in report.failures()]
    assert "A0 terminal 0" in failing


def test_terminal_cost_rejects_negative():
    g = Grid2.square(5)
    with pytest.raises(ValidationError):
        TerminalCost(g, {(0, 0): -1.0})


def test_trajectory_cost_integration_straight_line():
    speed = ConstantSpeed(2.0)
    costs = [ConstantCost(1.0)]
    pts = [(0.1, 0.1), (0.4, 0.5), (0.7, 0.9)]
    cum = integrate_costs(pts, costs, speed)
    length = math.hypot(0.3, 0.4) * 2
    assert cum[-1, 0] == pytest.approx(length / 2.0, abs=1e-12)


def test_problem_requires_matching_budgets():
    g = Grid2.square(11)
    with pytest.raises(ValidationError):
        ControlProblem(
            grid=g, speed=ConstantSpeed(1.0),
            costs=[ConstantCost(1.0)] * 3,
            terminals=[TerminalCost.at_points(g, [(1, 1)], 0.0)] * 3,
            budgets=BudgetAxes((1.0,), (11,)),
        )
