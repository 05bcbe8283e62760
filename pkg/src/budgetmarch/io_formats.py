"""Delimited and image export of fields, fronts, trajectories and masks.

CSV conventions: row-major with x fastest, "inf" literal for the sentinel,
9 significant digits.  Heatmaps are 8-bit binary PGM, linearly scaled over
the finite value range with +inf rendered as 0.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def _fmt(v: float) -> str:
    if np.isposinf(v):
        return "inf"
    if np.isneginf(v):
        return "-inf"
    return f"{v:.9g}"


def write_field_csv(path, values: np.ndarray, h: float, header="x,y,value"):
    """One gridpoint per row, y-major (x varies fastest)."""
    values = np.asarray(values)
    nx, ny = values.shape
    lines = [header]
    for iy in range(ny):
        for ix in range(nx):
            lines.append(f"{_fmt(ix * h)},{_fmt(iy * h)},{_fmt(values[ix, iy])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_slice_csv(path, values: np.ndarray, h: float, b_label: str, b_value: float):
    write_field_csv(path, values, h, header=f"x,y,value (at {b_label}={_fmt(b_value)})")


def write_front_csv(path, fronts):
    """Rows J_0, b_1[, b_2], tight, source for one or more fronts."""
    fronts = list(fronts)
    r = fronts[0].points.shape[1] - 1 if len(fronts) and fronts[0].points.size else 1
    cols = "J0,b1" + (",b2" if r == 2 else "") + ",tight,source"
    lines = [cols]
    for front in fronts:
        for row, tight in zip(front.points, front.tight_mask):
            vals = ",".join(_fmt(v) for v in row)
            lines.append(f"{vals},{1 if tight else 0},{front.source}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_trajectory_csv(path, traj, start_budget=None):
    """Rows x, y, b_1[, b_2], cumulative J_0."""
    r = max(0, traj.cum_costs.shape[1] - 1) if traj.cum_costs.size else 0
    if start_budget is not None:
        r = len(start_budget)
    cols = "x,y" + "".join(f",b{i+1}" for i in range(r)) + ",J0"
    lines = [cols]
    budgets = traj.budgets_along(start_budget) if start_budget is not None else None
    for k, (x, y) in enumerate(traj.points):
        parts = [_fmt(x), _fmt(y)]
        if budgets is not None:
            parts += [_fmt(b) for b in budgets[k]]
        j0 = traj.cum_costs[k, 0] if traj.cum_costs.size else 0.0
        parts.append(_fmt(j0))
        lines.append(",".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def write_pgm(path, values: np.ndarray, invert=False):
    """8-bit binary PGM of a field; returns the (lo, hi) scaling bounds."""
    values = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(values)
    if finite.any():
        lo, hi = float(values[finite].min()), float(values[finite].max())
    else:
        lo, hi = 0.0, 1.0
    span = hi - lo if hi > lo else 1.0
    img = np.zeros(values.shape, dtype=np.uint8)
    scaled = ((values - lo) / span * 255.0).clip(0, 255)
    img[finite] = scaled[finite].astype(np.uint8)
    img[~finite] = 0
    if invert:
        img = 255 - img
    # PGM raster is row-by-row top to bottom: rows = y descending, x fastest
    raster = img.T[::-1, :]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{raster.shape[1]} {raster.shape[0]}\n255\n".encode())
        fh.write(raster.tobytes())
    return lo, hi


def write_mask_pgm(path, mask: np.ndarray):
    """Visibility mask: 0 = visible, 255 = non-visible."""
    img = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    raster = img.T[::-1, :]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{raster.shape[1]} {raster.shape[0]}\n255\n".encode())
        fh.write(raster.tobytes())


def write_mask_csv(path, mask: np.ndarray, h: float):
    write_field_csv(path, np.asarray(mask, dtype=np.float64), h,
                    header="x,y,non_visible")


def write_manifest(path, manifest: dict):
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                     default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and np.isinf(obj):
        return "inf"
    return str(obj)
