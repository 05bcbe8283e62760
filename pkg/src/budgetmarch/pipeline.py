"""End-to-end solve pipeline: static -> restricted -> MFL -> march."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .augmented import (AugmentedField, MarchParams, MflSurface, build_mfl,
                        domain_reduction_report, march_augmented)
from .core import ControlProblem
from .restricted import solve_restricted
from .static_solver import StaticSolveParams, solve_static


@dataclass
class SolveResult:
    problem: ControlProblem
    u: list                    # u_i per cost index
    v: dict                    # v[(i, j)] = cost i along j-optimal paths
    mfl: MflSurface
    field: AugmentedField
    timings: dict = field(default_factory=dict)

    @property
    def reduction(self):
        u1 = self.u[1]
        v10 = self.v.get((1, 0))
        return domain_reduction_report(self.field, u1, v10,
                                       self.problem.obstacle_mask())


def solve_problem(problem: ControlProblem,
                  march_params: MarchParams | None = None,
                  static_params: StaticSolveParams | None = None) -> SolveResult:
    """Run the full pipeline for one problem (r = 1 or 2)."""
    march_params = march_params or MarchParams()
    timings = {}
    r = problem.r

    t0 = time.perf_counter()
    u = [solve_static(problem, i, static_params) for i in range(r + 1)]
    timings["static"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    v = {}
    # caps: v_i0 (secondary costs along primary-optimal paths)
    caps = solve_restricted(problem, u[0], 0, list(range(1, r + 1)), static_params)
    for i, fld in zip(range(1, r + 1), caps):
        v[(i, 0)] = fld
    if r == 1:
        (v[(0, 1)],) = solve_restricted(problem, u[1], 1, [0], static_params)
    else:
        # the r = 2 MFL needs the 2-optimal and 1-optimal cross costs
        v01_v21 = solve_restricted(problem, u[1], 1, [0, 2], static_params)
        v[(0, 1)], v[(2, 1)] = v01_v21
        v02_v12 = solve_restricted(problem, u[2], 2, [0, 1], static_params)
        v[(0, 2)], v[(1, 2)] = v02_v12
    timings["restricted"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    mfl = build_mfl(problem, u, v, march_params)
    timings["mfl"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cap_levels = [v[(i, 0)] for i in range(1, r + 1)]
    fld = march_augmented(problem, mfl, u[0], cap_levels, march_params)
    timings["march"] = time.perf_counter() - t0
    return SolveResult(problem, u, v, mfl, fld, timings)
