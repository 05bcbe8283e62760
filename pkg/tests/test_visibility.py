import numpy as np
import pytest

from budgetmarch import Grid2, Rect
from budgetmarch.errors import ValidationError
from budgetmarch.io_formats import write_mask_pgm
from budgetmarch.visibility import (compute_visibility, observability_cost,
                                    ray_visibility_oracle)


def test_no_obstacles_empty_mask():
    g = Grid2.square(101)
    vis = compute_visibility((0.15, 0.0), [], g)
    assert not vis.non_visible.any()


def test_single_rectangle_shadow_oracle():
    # occluder between the observer and the far corner; the threshold uses
    # the heuristically adjusted multiplier the shipped scenarios record
    g = Grid2.square(251)
    rects = [Rect(0.45, 0.65, 0.40, 0.60)]
    vis = compute_visibility((0.15, 0.0), rects, g, threshold=0.5)
    oracle = ray_visibility_oracle((0.15, 0.0), rects, g)
    ti, tj = g.nearest_index(1.0, 1.0)
    assert vis.non_visible[ti, tj]
    assert oracle[ti, tj]
    agreement = (vis.non_visible == oracle).mean()
    assert agreement >= 0.95, f"agreement {agreement:.4f}"


def test_shipped_avoid_observer_target_hidden():
    from budgetmarch import load_scenario

    scen = load_scenario("avoid-observer", {"grid.n": 251})
    vis = scen.visibility[0]
    ti, tj = scen.problem.grid.nearest_index(1.0, 1.0)
    assert vis.non_visible[ti, tj]


def test_comparison_principle_and_threshold_monotonicity():
    g = Grid2.square(151)
    rects = [Rect(0.4, 0.6, 0.3, 0.5)]
    lo = compute_visibility((0.15, 0.0), rects, g, threshold=1.0)
    hi = compute_visibility((0.15, 0.0), rects, g, threshold=3.0)
    both = np.isfinite(lo.psi_blocked.values)
    assert (lo.psi_blocked.values[both] >= lo.psi_free.values[both] - 1e-12).all()
    # larger threshold yields a subset mask
    assert not (hi.non_visible & ~lo.non_visible).any()


def test_observer_inside_obstacle_rejected():
    g = Grid2.square(51)
    with pytest.raises(ValidationError):
        compute_visibility((0.5, 0.4), [Rect(0.4, 0.6, 0.3, 0.5)], g)


def test_observability_cost_rates():
    g = Grid2.square(51)
    vis = compute_visibility((0.15, 0.0), [Rect(0.4, 0.6, 0.3, 0.5)], g)
    # enemy observer (Table-2-style rates)
    enemy = observability_cost(vis, visible_rate=10.0, hidden_rate=0.1)
    vals = enemy.grid_values(g, None)
    assert set(np.unique(vals)) == {0.1, 10.0}
    assert vals[~vis.non_visible].max() == 10.0
    assert vals[vis.non_visible].min() == 0.1
    # exposure as a budgeted cost (Table-3-style rates)
    exposure = observability_cost(vis, visible_rate=5.0, hidden_rate=1.0)
    vv = exposure.grid_values(g, None)
    assert vv[~vis.non_visible].max() == 5.0 and vv[vis.non_visible].min() == 1.0
    # friendly observer inverts the roles (Table-4-style rates)
    friendly = observability_cost(vis, visible_rate=1.0, hidden_rate=5.0)
    fv = friendly.grid_values(g, None)
    assert fv[vis.non_visible].min() == 5.0 and fv[~vis.non_visible].max() == 1.0
    with pytest.raises(ValidationError):
        observability_cost(vis, 0.0, 1.0)


def test_mask_pgm_roundtrip(tmp_path):
    g = Grid2.square(51)
    vis = compute_visibility((0.15, 0.0), [Rect(0.4, 0.6, 0.3, 0.5)], g)
    path = tmp_path / "mask.pgm"
    write_mask_pgm(path, vis.non_visible)
    raw = path.read_bytes()
    header, rest = raw.split(b"\n", 1)
    assert header == b"P5"
    dims, rest = rest.split(b"\n", 1)
    assert dims == b"51 51"
    maxval, pixels = rest.split(b"\n", 1)
    img = np.frombuffer(pixels, dtype=np.uint8).reshape(51, 51)
    # raster rows run from y = 1 down to y = 0, x fastest
    assert set(np.unique(img)) <= {0, 255}
    recovered = img[::-1, :].T.astype(bool)
    assert np.array_equal(recovered, vis.non_visible)
