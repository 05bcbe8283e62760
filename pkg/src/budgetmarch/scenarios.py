"""Scenario configuration: TOML loading and the shipped test problems.

The TOML schema mirrors the solver inputs one-to-one:

    [scenario]  name, start = [x, y], description, trace_budgets = [[...], ...]
    [grid]      n = 201
    [budgets]   bounds = [2.0], counts = [401]
    [speed]     kind = "constant" | "sinusoid" | "elliptic", parameters
    [[cost]]    kind = "constant" | "regions" | "pathlength" | "observability"
    [[terminal]]  point = [x, y], values = [q_0, ..., q_r]
    [[obstacle]]  rect = [x0, x1, y0, y1]
    [[observer]]  point = [x, y]
    [march]     algorithm = 1

Observability costs reference an observer by index and are rasterized from
the two-Eikonal visibility mask; "regions" costs may request smoothing
(5x5 normalized box kernel), which is recorded in the manifest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .augmented import MarchParams
from .static_solver import StaticSolveParams
from .core import (BudgetAxes, ConstantCost, ConstantSpeed, ControlProblem,
                   EllipticSpeed, Grid2, GriddedCost, Rect, RegionCost,
                   SinusoidSpeed, SpeedCost, TerminalCost)
from .errors import ValidationError
from .visibility import DEFAULT_THRESHOLD, compute_visibility, observability_cost

SMOOTH_KERNEL = 5  # box kernel width for smoothed region costs


@dataclass
class Scenario:
    name: str
    problem: ControlProblem
    start: tuple
    march: MarchParams
    observers: list
    visibility: list  # VisibilityResult per observer
    trace_budgets: list
    statics: StaticSolveParams | None = None
    description: str = ""
    config: dict = field(default_factory=dict)
    smoothing: dict = field(default_factory=dict)


def box_smooth(values: np.ndarray, width: int = SMOOTH_KERNEL) -> np.ndarray:
    """Normalized width x width box filter with edge padding."""
    if width % 2 != 1:
        raise ValidationError("smoothing kernel width must be odd")
    pad = width // 2
    padded = np.pad(values, pad, mode="edge")
    out = np.zeros_like(values, dtype=np.float64)
    for di in range(width):
        for dj in range(width):
            out += padded[di:di + values.shape[0], dj:dj + values.shape[1]]
    return out / (width * width)


def _build_speed(cfg: dict, grid: Grid2):
    kind = cfg.get("kind", "constant")
    if kind == "constant":
        return ConstantSpeed(cfg.get("value", 1.0))
    if kind == "sinusoid":
        return SinusoidSpeed(cfg["base"], cfg["amp"],
                             cfg["kx"] * math.pi, cfg["ky"] * math.pi)
    if kind == "elliptic":
        return EllipticSpeed(cfg["F1"], cfg["F2"], cfg["amplitude"],
                             cfg["frequency"] * math.pi)
    raise ValidationError(f"unknown speed kind {kind!r}")


def _build_cost(cfg: dict, grid: Grid2, speed, vis_results, smoothing: dict,
                index: int):
    kind = cfg.get("kind", "constant")
    if kind == "constant":
        return ConstantCost(cfg.get("rate", 1.0))
    if kind == "pathlength":
        return SpeedCost()
    if kind == "regions":
        regions = [(Rect(*r["rect"]), r["rate"]) for r in cfg.get("regions", [])]
        cost = RegionCost(cfg.get("outside", 1.0), regions)
        if cfg.get("smooth", False):
            vals = box_smooth(cost.grid_values(grid), SMOOTH_KERNEL)
            smoothing[f"cost_{index}"] = {
                "kernel": f"{SMOOTH_KERNEL}x{SMOOTH_KERNEL} box",
                "padding": "edge",
            }
            return GriddedCost(grid, vals)
        return cost
    if kind == "observability":
        obs_idx = cfg.get("observer", 0)
        if obs_idx >= len(vis_results):
            raise ValidationError(f"cost references observer {obs_idx} "
                                  f"but only {len(vis_results)} defined")
        return observability_cost(vis_results[obs_idx], cfg["visible"],
                                  cfg["hidden"])
    raise ValidationError(f"unknown cost kind {kind!r}")


def load_scenario(source, overrides: dict | None = None) -> Scenario:
    """Build a Scenario from a TOML path, file name, or parsed dict."""
    if isinstance(source, dict):
        cfg = dict(source)
        name = cfg.get("scenario", {}).get("name", "inline")
    else:
        path = Path(source)
        if not path.exists():
            path = _shipped_path(str(source))
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
        name = cfg.get("scenario", {}).get("name", path.stem)
    overrides = overrides or {}
    for key, value in overrides.items():
        section, _, leaf = key.partition(".")
        if not leaf:
            raise ValidationError(f"override {key!r} must be section.key")
        cfg.setdefault(section, {})[leaf] = value

    n = int(cfg.get("grid", {}).get("n", 101))
    grid = Grid2.square(n)
    bcfg = cfg.get("budgets", {})
    budgets = BudgetAxes(tuple(float(b) for b in bcfg.get("bounds", [1.0])),
                         tuple(int(c) for c in bcfg.get("counts", [101])))
    speed = _build_speed(cfg.get("speed", {}), grid)
    obstacles = [Rect(*o["rect"]) for o in cfg.get("obstacle", [])]
    observers = [tuple(o["point"]) for o in cfg.get("observer", [])]
    threshold = cfg.get("visibility", {}).get("threshold", DEFAULT_THRESHOLD)
    vis_results = [compute_visibility(o, obstacles, grid, threshold)
                   for o in observers]

    smoothing: dict = {}
    costs = [_build_cost(c, grid, speed, vis_results, smoothing, i)
             for i, c in enumerate(cfg.get("cost", []))]
    if not costs:
        raise ValidationError("scenario defines no costs")

    terminals = []
    term_cfgs = cfg.get("terminal", [])
    if not term_cfgs:
        raise ValidationError("scenario defines no terminal points")
    for i in range(len(costs)):
        entries = {}
        for t in term_cfgs:
            values = t.get("values", [0.0] * len(costs))
            entries[grid.nearest_index(*t["point"])] = values[i]
        terminals.append(TerminalCost(grid, entries))

    problem = ControlProblem(grid=grid, speed=speed, costs=costs,
                             terminals=terminals, budgets=budgets,
                             obstacles=obstacles)
    mcfg = cfg.get("march", {})
    march = MarchParams(
        algorithm=int(mcfg.get("algorithm", 1)),
        angle_samples=int(mcfg.get("angle_samples", 8)),
        golden_tolerance=float(mcfg.get("golden_tolerance", 1e-6)),
    )
    statics = None
    sscfg = cfg.get("static", {})
    if sscfg:
        statics = StaticSolveParams(
            tau=float(sscfg["tau_cells"]) * grid.h if "tau_cells" in sscfg else None,
            max_sweeps=int(sscfg.get("max_sweeps", 200)),
        )
    scfg = cfg.get("scenario", {})
    return Scenario(
        name=name,
        problem=problem,
        start=tuple(scfg.get("start", [0.1, 0.1])),
        march=march,
        statics=statics,
        observers=observers,
        visibility=vis_results,
        trace_budgets=[list(b) for b in scfg.get("trace_budgets", [])],
        description=scfg.get("description", ""),
        config=cfg,
        smoothing=smoothing,
    )


def _shipped_path(name: str) -> Path:
    base = importlib_resources.files("budgetmarch") / "scenarios"
    candidate = base / (name if name.endswith(".toml") else f"{name}.toml")
    if not candidate.is_file():
        raise ValidationError(
            f"unknown scenario {name!r}; shipped: {', '.join(shipped_scenarios())}")
    return Path(str(candidate))


def shipped_scenarios() -> list[str]:
    base = importlib_resources.files("budgetmarch") / "scenarios"
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".toml"))
