"""Flattening of problem objects into the plain arrays the kernels consume."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Grid2, SpeedModel


@dataclass
class KernelPack:
    """Array form of speed, costs, obstacles and terminals for one problem."""

    skind: int
    sgrid: np.ndarray
    sp: np.ndarray
    ckinds: np.ndarray
    cgrids: np.ndarray
    crn: np.ndarray
    cro: np.ndarray
    crects: np.ndarray
    couts: np.ndarray
    obs: np.ndarray
    term_ix: np.ndarray
    term_iy: np.ndarray
    term_x: np.ndarray
    term_y: np.ndarray
    term_q: np.ndarray  # (n_terminals, n_costs)

    @property
    def speed_args(self):
        return (self.skind, self.sgrid, self.sp)

    @property
    def cost_args(self):
        return (self.ckinds, self.cgrids, self.crn, self.cro, self.crects, self.couts)


def build_pack(grid: Grid2, speed: SpeedModel, costs, terminals, obstacles) -> KernelPack:
    skind, sgrid, sp = speed.pack(grid)

    nc = len(costs)
    ckinds = np.zeros(nc, dtype=np.int64)
    cgrids = np.zeros((nc, grid.nx, grid.ny))
    crn = np.zeros(nc, dtype=np.int64)
    cro = np.zeros(nc, dtype=np.int64)
    couts = np.zeros(nc)
    rect_rows = []
    for i, cost in enumerate(costs):
        kind, cgrid, rects, outside = cost.pack(grid, speed)
        ckinds[i] = kind
        if kind == 0:
            cgrids[i] = cgrid
        else:
            cgrids[i] = cost.grid_values(grid, speed)
        cro[i] = len(rect_rows)
        crn[i] = rects.shape[0]
        couts[i] = outside
        for row in rects:
            rect_rows.append(row)
    crects = np.asarray(rect_rows) if rect_rows else np.zeros((0, 5))

    obs = (
        np.array([r.as_array() for r in obstacles]) if obstacles else np.zeros((0, 4))
    )

    # terminal gridpoints finite in at least one cost, with per-cost q columns
    keys = set()
    for term in terminals:
        keys.update(ix_iy for ix_iy, q in term.entries.items() if np.isfinite(q))
    keys = sorted(keys)
    n_t = len(keys)
    term_ix = np.array([k[0] for k in keys], dtype=np.int64).reshape(n_t)
    term_iy = np.array([k[1] for k in keys], dtype=np.int64).reshape(n_t)
    term_x = term_ix * grid.h
    term_y = term_iy * grid.h
    term_q = np.full((n_t, len(terminals)), np.inf)
    for t, (ix, iy) in enumerate(keys):
        for i, term in enumerate(terminals):
            term_q[t, i] = term.q_at(ix, iy)
    return KernelPack(
        skind, np.ascontiguousarray(sgrid), sp,
        ckinds, cgrids, crn, cro, crects, couts, obs,
        term_ix, term_iy, term_x, term_y, term_q,
    )
