import numpy as np
import pytest

from budgetmarch.errors import ValidationError
from budgetmarch.pareto import (WeightMesh, compare_fronts, extract_front,
                                hausdorff_distance, lower_convex_envelope,
                                tightness_threshold, weighted_sum_front)


def test_convergence_front_two_points(conv100):
    res = conv100
    prob = res.problem
    front = extract_front(res.field, prob, (0.25, 0.5))
    assert len(front.points) == 2
    tol_j = 2 * prob.hat_h
    tol_b = prob.budgets.deltas[0] + 1e-12
    pts = sorted(map(tuple, front.points))
    assert pts[0][0] == pytest.approx(0.75, abs=tol_j)
    assert pts[0][1] == pytest.approx(0.75, abs=tol_b)
    assert pts[1][0] == pytest.approx(1.75, abs=tol_j)
    assert pts[1][1] == pytest.approx(0.25, abs=tol_b)


def test_degenerate_costs_single_point(unit81):
    res = unit81
    front = extract_front(res.field, res.problem, (0.3, 0.4))
    assert len(front.points) == 1
    u0 = res.u[0](0.3, 0.4)
    assert front.points[0][0] == pytest.approx(u0, abs=2 * res.problem.hat_h)
    assert front.points[0][1] == pytest.approx(
        u0, abs=res.problem.budgets.deltas[0] + 2 * res.problem.hat_h)


def test_weighted_sum_endpoints(conv100):
    res = conv100
    prob = res.problem
    start = (0.25, 0.5)
    mesh = WeightMesh(np.array([[1.0, 0.0], [0.0, 1.0]]))
    ws = weighted_sum_front(prob, mesh, start)
    assert len(ws.points) == 2
    # lambda = (1,0): (u_0, v_10); lambda = (0,1): (v_01, u_1)
    u0 = res.u[0](*start)
    v10 = res.v[(1, 0)](*start)
    v01 = res.v[(0, 1)](*start)
    u1 = res.u[1](*start)
    pts = sorted(map(tuple, ws.points), key=lambda p: p[1])
    assert pts[1][0] == pytest.approx(u0, abs=1e-6)
    assert pts[1][1] == pytest.approx(v10, abs=1e-6)
    assert pts[0][0] == pytest.approx(v01, abs=1e-6)
    assert pts[0][1] == pytest.approx(u1, abs=1e-6)


def test_weighted_sum_points_near_front(conv100):
    res = conv100
    prob = res.problem
    start = (0.25, 0.5)
    theta = tightness_threshold(prob)
    ws = weighted_sum_front(prob, WeightMesh.uniform(5, 1), start)
    aug = extract_front(res.field, prob, start)
    for wj0, wb in ws.points:
        dominated_or_equal = any(
            (aj0 <= wj0 + theta) and (ab <= wb + theta)
            for aj0, ab in aug.points
        )
        assert dominated_or_equal


def test_front_containment_box(conv100):
    res = conv100
    prob = res.problem
    start = (0.25, 0.5)
    front = extract_front(res.field, prob, start)
    u0 = res.u[0](*start)
    u1 = res.u[1](*start)
    v01 = res.v[(0, 1)](*start)
    v10 = res.v[(1, 0)](*start)
    pad = 2 * prob.hat_h
    for j0, b in front.points:
        assert u0 - pad <= j0 <= v01 + pad
        assert u1 - pad <= b <= v10 + pad


def test_mutual_non_domination(conv100):
    res = conv100
    prob = res.problem
    theta = tightness_threshold(prob)
    front = extract_front(res.field, prob, (0.25, 0.5))
    pts = front.points
    for i in range(len(pts)):
        for j in range(len(pts)):
            if i == j:
                continue
            strictly = (pts[j][0] < pts[i][0] - theta) and (pts[j][1] < pts[i][1] - theta)
            assert not strictly


def test_front_containment_u(conv100):
    # Pareto points never beat the unconstrained optima
    res = conv100
    prob = res.problem
    start = (0.25, 0.5)
    front = extract_front(res.field, prob, start)
    pad = 2 * prob.hat_h
    assert (front.points[:, 0] >= res.u[0](*start) - pad).all()
    assert (front.points[:, 1] >= res.u[1](*start) - pad).all()


def test_extract_rejects_obstacle_start():
    from budgetmarch import (BudgetAxes, ConstantCost, ConstantSpeed,
                             ControlProblem, Grid2, Rect, TerminalCost)
    from budgetmarch.pipeline import solve_problem

    g = Grid2.square(31)
    prob = ControlProblem(
        grid=g, speed=ConstantSpeed(1.0),
        costs=[ConstantCost(1.0), ConstantCost(1.0)],
        terminals=[TerminalCost.at_points(g, [(1, 1)], 0.0)] * 2,
        budgets=BudgetAxes((2.0,), (21,)),
        obstacles=[Rect(0.4, 0.6, 0.4, 0.6)],
    )
    res = solve_problem(prob)
    with pytest.raises(ValidationError):
        extract_front(res.field, prob, (0.5, 0.5))


def test_lower_convex_envelope_shapes():
    pts = np.array([[1.0, 0.0], [0.55, 1.0], [0.5, 2.0]])  # (J0, b): convex
    env = lower_convex_envelope(pts)
    assert env(0.0) == pytest.approx(1.0)
    assert env(2.0) == pytest.approx(0.5)
    assert env(1.0) <= 0.55 + 1e-12
    # a point above the chord is dropped from the hull
    pts2 = np.array([[1.0, 0.0], [0.9, 1.0], [0.5, 2.0]])
    env2 = lower_convex_envelope(pts2)
    assert env2(1.0) == pytest.approx(0.75)
    assert env2(3.0) == np.inf


def test_hausdorff_distance():
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    b = np.array([[0.0, 0.5], [1.0, 1.0]])
    assert hausdorff_distance(a, b) == pytest.approx(0.5)


def test_weight_mesh_validation():
    with pytest.raises(ValidationError):
        WeightMesh(np.array([[0.5, 0.6]]))
    with pytest.raises(ValidationError):
        WeightMesh(np.array([[-0.1, 1.1]]))
    mesh = WeightMesh.uniform(5, 1)
    assert mesh.lambdas.shape == (5, 2)


def test_compare_fronts_degenerate_gap_zero(unit81):
    res = unit81
    comparison = compare_fronts(res.problem, res.field, (0.3, 0.4),
                                WeightMesh.uniform(5, 1))
    assert comparison.max_gap <= 3 * comparison.theta
    assert not comparison.nonconvex_detected
    assert np.isfinite(comparison.hausdorff)


def test_ws_vectors_not_strictly_dominated(conv100):
    # restricted-cost vectors lie on the front: no extracted point strictly
    # dominates them beyond the discretization pad
    res = conv100
    prob = res.problem
    pad = 2 * prob.hat_h
    ws = weighted_sum_front(prob, WeightMesh.uniform(5, 1), (0.25, 0.5))
    aug = extract_front(res.field, prob, (0.25, 0.5))
    for wj0, wb in ws.points:
        for aj0, ab in aug.points:
            assert not (aj0 < wj0 - pad and ab < wb - pad)
