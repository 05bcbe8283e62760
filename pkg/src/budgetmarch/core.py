"""Grid geometry, fields, problem definitions, interpolation and validation.

Everything lives on the unit square [0,1]^2 with equal spacing h in both
directions.  +inf is the only infinity sentinel: it marks unreachable or
infeasible states and is propagated conservatively by interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomainError, ValidationError

INF = float("inf")

# Corners whose bilinear weight falls below this do not participate in the
# conservative +inf propagation (feet landing exactly on grid lines keep the
# two supporting corners only).
WEIGHT_EPS = 1e-12


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class Grid2:
    """Uniform gridpoint lattice on [0,1]^2: nx by ny points, spacing h."""

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValidationError("grid needs at least 2 points per axis")
        if self.nx != self.ny:
            raise ValidationError(
                "unit-square grid requires equal spacing: nx must equal ny"
            )

    @property
    def h(self) -> float:
        return 1.0 / (self.nx - 1)

    @classmethod
    def square(cls, n: int) -> "Grid2":
        return cls(n, n)

    def xs(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.ny)

    def meshgrid(self):
        return np.meshgrid(self.xs(), self.ys(), indexing="ij")

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0

    def nearest_index(self, x: float, y: float) -> tuple[int, int]:
        if not self.contains(x, y):
            raise OutOfDomainError(f"position ({x}, {y}) outside [0,1]^2")
        return (int(round(x / self.h)), int(round(y / self.h)))

    def point(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix * self.h, iy * self.h)

    def is_boundary(self, ix: int, iy: int) -> bool:
        return ix == 0 or iy == 0 or ix == self.nx - 1 or iy == self.ny - 1


@dataclass(frozen=True)
class BudgetAxes:
    """Budget grids b_i in [0, B_i] for the r secondary costs (r = 1 or 2)."""

    bounds: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.bounds) != len(self.counts):
            raise ValidationError("budget bounds and counts must pair up")
        if not 1 <= self.r <= 2:
            raise ValidationError("number of secondary costs must be 1 or 2")
        for b, n in zip(self.bounds, self.counts):
            if b <= 0:
                raise ValidationError("budget bounds must be positive")
            if n < 2:
                raise ValidationError("budget axes need at least 2 points")

    @property
    def r(self) -> int:
        return len(self.bounds)

    @property
    def deltas(self) -> tuple[float, ...]:
        return tuple(b / (n - 1) for b, n in zip(self.bounds, self.counts))

    def hat_h(self, grid: Grid2) -> float:
        """Largest spacing over all extended-grid axes."""
        return max(grid.h, max(self.deltas))

    def values(self, i: int) -> np.ndarray:
        return np.linspace(0.0, self.bounds[i], self.counts[i])


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle [x0,x1] x [y0,y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValidationError("rectangle has negative extent")

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.x1, self.y0, self.y1])


# ---------------------------------------------------------------------------
# fields


class ScalarField:
    """Values on the gridpoint lattice, indexed values[ix, iy], +inf allowed."""

    def __init__(self, grid: Grid2, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.nx, grid.ny):
            raise ValidationError(
                f"field shape {values.shape} does not match grid ({grid.nx}, {grid.ny})"
            )
        self.grid = grid
        self.values = values

    @classmethod
    def full(cls, grid: Grid2, value: float) -> "ScalarField":
        return cls(grid, np.full((grid.nx, grid.ny), value, dtype=np.float64))

    @classmethod
    def from_function(cls, grid: Grid2, fn) -> "ScalarField":
        xx, yy = grid.meshgrid()
        return cls(grid, np.asarray(fn(xx, yy), dtype=np.float64))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    def max_finite(self) -> float:
        m = self.finite_mask()
        return float(self.values[m].max()) if m.any() else 0.0

    def __call__(self, x: float, y: float) -> float:
        return interpolate_bilinear(self, (x, y))


def interpolate_bilinear(fld: ScalarField, p) -> float:
    """Tensor-product linear interpolation of the four enclosing corners.

    Any participating corner at +inf makes the result +inf (conservative
    propagation); corners with weight below WEIGHT_EPS do not participate.
    """
    x, y = float(p[0]), float(p[1])
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise OutOfDomainError(f"position ({x}, {y}) outside [0,1]^2")
    g = fld.grid
    h = g.h
    i = min(int(x / h), g.nx - 2)
    j = min(int(y / h), g.ny - 2)
    gx = x / h - i
    gy = y / h - j
    total = 0.0
    for di, wx in ((0, 1.0 - gx), (1, gx)):
        for dj, wy in ((0, 1.0 - gy), (1, gy)):
            w = wx * wy
            if w <= WEIGHT_EPS:
                continue
            v = fld.values[i + di, j + dj]
            if not np.isfinite(v):
                return INF
            total += w * v
    return total


# ---------------------------------------------------------------------------
# speed models
#
# A speed model evaluates f(x, a) > 0 where a is a unit direction given by
# (cos, sin).  Kernel packing: kind 0 = gridded isotropic (bilinear lookup),
# kind 1 = elliptic anisotropic profile, kind 2 = separable sinusoid formula.


class SpeedModel:
    def evaluate(self, x: float, y: float, ca: float = 1.0, sa: float = 0.0) -> float:
        raise NotImplementedError

    def grid_values(self, grid: Grid2) -> np.ndarray:
        """Per-gridpoint speed, maximized over directions for anisotropy."""
        raise NotImplementedError

    def max_speed(self, grid: Grid2) -> float:
        return float(self.grid_values(grid).max())

    def pack(self, grid: Grid2):
        """(kind, grid_array, params[4]) consumed by the numba kernels."""
        raise NotImplementedError

    @property
    def isotropic(self) -> bool:
        return True


class GriddedSpeed(SpeedModel):
    """Isotropic speed sampled on the grid; off-grid values by bilinear lookup."""

    def __init__(self, grid: Grid2, values) -> None:
        if callable(values):
            xx, yy = grid.meshgrid()
            values = values(xx, yy)
        self.field = ScalarField(grid, np.asarray(values, dtype=np.float64))

    def evaluate(self, x, y, ca=1.0, sa=0.0):
        return interpolate_bilinear(self.field, (x, y))

    def grid_values(self, grid):
        if grid != self.field.grid:
            raise ValidationError("speed was sampled on a different grid")
        return self.field.values

    def pack(self, grid):
        return 0, np.ascontiguousarray(self.grid_values(grid)), np.zeros(4)


class ConstantSpeed(GriddedSpeed):
    def __init__(self, value: float = 1.0) -> None:
        self.value = float(value)
        self._grid = None

    def evaluate(self, x, y, ca=1.0, sa=0.0):
        return self.value

    def grid_values(self, grid):
        return np.full((grid.nx, grid.ny), self.value)

    def pack(self, grid):
        return 0, np.ascontiguousarray(self.grid_values(grid)), np.zeros(4)


class SinusoidSpeed(SpeedModel):
    """f(x,y) = base + amp*sin(kx*x)*sin(ky*y), evaluated exactly off-grid."""

    def __init__(self, base: float, amp: float, kx: float, ky: float) -> None:
        self.base, self.amp, self.kx, self.ky = base, amp, kx, ky
        if base - abs(amp) <= 0:
            raise ValidationError("sinusoid speed must stay positive")

    def evaluate(self, x, y, ca=1.0, sa=0.0):
        return self.base + self.amp * math.sin(self.kx * x) * math.sin(self.ky * y)

    def grid_values(self, grid):
        xx, yy = grid.meshgrid()
        return self.base + self.amp * np.sin(self.kx * xx) * np.sin(self.ky * yy)

    def pack(self, grid):
        return 2, np.zeros((1, 1)), np.array([self.base, self.amp, self.kx, self.ky])


class EllipticSpeed(SpeedModel):
    """Anisotropic elliptic velocity profile aligned with a sinusoid graph.

    The profile at x is an ellipse with semi-axes F2 (major, tangent to the
    graph of C(x) = amplitude*sin(frequency*x)) and F1 (minor).
    """

    def __init__(self, F1: float, F2: float, amplitude: float, frequency: float):
        if not (F2 >= F1 > 0):
            raise ValidationError("elliptic profile requires F2 >= F1 > 0")
        self.F1, self.F2 = float(F1), float(F2)
        self.amplitude, self.frequency = float(amplitude), float(frequency)

    def _pq(self, x: float) -> tuple[float, float]:
        dc = self.amplitude * self.frequency * math.cos(self.frequency * x)
        s = math.sqrt((self.F2 / self.F1) ** 2 - 1.0) / math.sqrt(1.0 + dc * dc)
        return s * dc, -s

    def evaluate(self, x, y, ca=1.0, sa=0.0):
        p, q = self._pq(x)
        d = p * ca + q * sa
        return self.F2 / math.sqrt(1.0 + d * d)

    def grid_values(self, grid):
        # direction-maximized speed is F2 everywhere
        return np.full((grid.nx, grid.ny), self.F2)

    def pack(self, grid):
        return 1, np.zeros((1, 1)), np.array(
            [self.F1, self.F2, self.amplitude, self.frequency]
        )

    @property
    def isotropic(self):
        return False


def eval_anisotropic_speed(model: EllipticSpeed, x, a) -> float:
    """Speed of the elliptic profile at position x along unit direction a."""
    ax, ay = float(a[0]), float(a[1])
    n = math.hypot(ax, ay)
    if abs(n - 1.0) > 1e-9:
        raise ValidationError("direction must be a unit vector")
    return model.evaluate(float(x[0]), float(x[1]), ax, ay)


# ---------------------------------------------------------------------------
# cost models
#
# Kernel packing per cost: kind 0 = gridded (bilinear), kind 1 = equals the
# speed f(x,a) (pathlength rate), kind 2 = piecewise-constant rectangles
# (later rectangles override earlier ones).


class CostModel:
    def evaluate(self, x, y, ca=1.0, sa=0.0, speed=None) -> float:
        raise NotImplementedError

    def grid_values(self, grid: Grid2, speed: SpeedModel) -> np.ndarray:
        xx, yy = grid.meshgrid()
        out = np.empty_like(xx)
        for i in range(grid.nx):
            for j in range(grid.ny):
                out[i, j] = self.evaluate(xx[i, j], yy[i, j], speed=speed)
        return out

    def bounds(self, grid: Grid2, speed: SpeedModel, n_angles: int = 16):
        """Sampled (k1, k2) over gridpoints and a uniform angle fan."""
        vals = []
        angs = np.linspace(0.0, 2 * math.pi, n_angles, endpoint=False)
        for x in grid.xs()[:: max(1, grid.nx // 32)]:
            for y in grid.ys()[:: max(1, grid.ny // 32)]:
                for a in angs:
                    vals.append(self.evaluate(x, y, math.cos(a), math.sin(a), speed))
        vals = np.asarray(vals)
        finite = vals[np.isfinite(vals)]
        k1 = float(finite.min()) if finite.size else INF
        k2 = float(finite.max()) if finite.size else INF
        return k1, k2

    def pack(self, grid: Grid2, speed: SpeedModel):
        """(kind, grid_array, rects(n,5), outside_rate)"""
        raise NotImplementedError


_NO_RECTS = np.zeros((0, 5))


class RegionCost(CostModel):
    """outside_rate, overridden inside listed rectangles (later rects win)."""

    def __init__(self, outside_rate: float, regions=()):  # regions: [(Rect, rate)]
        self.outside_rate = float(outside_rate)
        self.regions = [(r if isinstance(r, Rect) else Rect(*r), float(v)) for r, v in regions]

    def evaluate(self, x, y, ca=1.0, sa=0.0, speed=None):
        rate = self.outside_rate
        for rect, v in self.regions:
            if rect.contains(x, y):
                rate = v
        return rate

    def grid_values(self, grid, speed=None):
        xx, yy = grid.meshgrid()
        out = np.full(xx.shape, self.outside_rate)
        for rect, v in self.regions:
            inside = (
                (xx >= rect.x0) & (xx <= rect.x1) & (yy >= rect.y0) & (yy <= rect.y1)
            )
            out[inside] = v
        return out

    def pack(self, grid, speed):
        if not self.regions:
            rects = _NO_RECTS
        else:
            rects = np.array(
                [[r.x0, r.x1, r.y0, r.y1, v] for r, v in self.regions]
            )
        return 2, np.zeros((1, 1)), rects, self.outside_rate


class ConstantCost(RegionCost):
    def __init__(self, rate: float):
        super().__init__(rate)


class GriddedCost(CostModel):
    """Isotropic cost sampled on the grid (e.g. smoothed threat fields)."""

    def __init__(self, grid: Grid2, values):
        if callable(values):
            xx, yy = grid.meshgrid()
            values = values(xx, yy)
        self.field = ScalarField(grid, values)

    def evaluate(self, x, y, ca=1.0, sa=0.0, speed=None):
        return interpolate_bilinear(self.field, (x, y))

    def grid_values(self, grid, speed=None):
        if grid != self.field.grid:
            raise ValidationError("cost was sampled on a different grid")
        return self.field.values

    def pack(self, grid, speed):
        return 0, np.ascontiguousarray(self.grid_values(grid)), _NO_RECTS, 0.0


class SpeedCost(CostModel):
    """K(x,a) = f(x,a): the accumulated cost is the pathlength."""

    def evaluate(self, x, y, ca=1.0, sa=0.0, speed=None):
        if speed is None:
            raise ValidationError("pathlength cost needs the speed model")
        return speed.evaluate(x, y, ca, sa)

    def grid_values(self, grid, speed):
        return speed.grid_values(grid)

    def pack(self, grid, speed):
        return 1, np.zeros((1, 1)), _NO_RECTS, 0.0


# ---------------------------------------------------------------------------
# terminal costs


class TerminalCost:
    """Finite exit costs at selected gridpoints; +inf everywhere else."""

    def __init__(self, grid: Grid2, entries: dict[tuple[int, int], float]):
        self.grid = grid
        self.entries = {}
        for (ix, iy), q in entries.items():
            q = float(q)
            if math.isfinite(q) and q < 0:
                raise ValidationError("terminal costs must be non-negative")
            self.entries[(int(ix), int(iy))] = q

    @classmethod
    def at_points(cls, grid: Grid2, points, values=0.0) -> "TerminalCost":
        """Terminal data at positions snapped to the nearest gridpoints."""
        if np.isscalar(values):
            values = [values] * len(points)
        entries = {}
        for (x, y), q in zip(points, values):
            entries[grid.nearest_index(x, y)] = q
        return cls(grid, entries)

    @classmethod
    def on_boundary(cls, grid: Grid2, value: float = 0.0) -> "TerminalCost":
        entries = {}
        for i in range(grid.nx):
            for j in range(grid.ny):
                if grid.is_boundary(i, j):
                    entries[(i, j)] = value
        return cls(grid, entries)

    def q_at(self, ix: int, iy: int) -> float:
        return self.entries.get((ix, iy), INF)

    def finite_points(self):
        return [(ix, iy, q) for (ix, iy), q in self.entries.items() if math.isfinite(q)]

    def min_value(self) -> float:
        return min(self.entries.values(), default=INF)


# ---------------------------------------------------------------------------
# the full problem


@dataclass
class ControlProblem:
    """Dynamics, r+1 running costs (index 0 primary), terminals and budgets."""

    grid: Grid2
    speed: SpeedModel
    costs: list
    terminals: list
    budgets: BudgetAxes
    obstacles: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.costs) != len(self.terminals):
            raise ValidationError("need one terminal cost per running cost")
        if len(self.costs) != self.budgets.r + 1:
            raise ValidationError("costs must number r+1 for r budget axes")
        for rect in self.obstacles:
            if not (0 <= rect.x0 and rect.x1 <= 1 and 0 <= rect.y0 and rect.y1 <= 1):
                raise ValidationError("obstacles must lie inside the unit square")

    @property
    def r(self) -> int:
        return self.budgets.r

    @property
    def hat_h(self) -> float:
        return self.budgets.hat_h(self.grid)

    def obstacle_mask(self) -> np.ndarray:
        """Gridpoints inside any closed obstacle rectangle."""
        mask = np.zeros((self.grid.nx, self.grid.ny), dtype=bool)
        if not self.obstacles:
            return mask
        xx, yy = self.grid.meshgrid()
        for r in self.obstacles:
            mask |= (xx >= r.x0) & (xx <= r.x1) & (yy >= r.y0) & (yy <= r.y1)
        return mask

    def obstacle_array(self) -> np.ndarray:
        if not self.obstacles:
            return np.zeros((0, 4))
        return np.array([r.as_array() for r in self.obstacles])

    def in_obstacle(self, x: float, y: float) -> bool:
        return any(r.contains(x, y) for r in self.obstacles)

    def primary_k2(self) -> float:
        return self.costs[0].bounds(self.grid, self.speed)[1]


# ---------------------------------------------------------------------------
# trajectories


class Trajectory:
    """Polyline of positions with budget history and accumulated costs.

    cum_costs[k, i] is J_i accumulated up to vertex k (terminal cost included
    on the final vertex when the path exits).
    """

    def __init__(self, points, cum_costs, terminated: str):
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        self.cum_costs = np.asarray(cum_costs, dtype=np.float64)
        self.terminated = terminated

    @property
    def cost_totals(self) -> np.ndarray:
        if len(self.cum_costs) == 0:
            return np.zeros(0)
        return self.cum_costs[-1]

    @property
    def length(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())

    def budgets_along(self, start_budget) -> np.ndarray:
        b0 = np.asarray(start_budget, dtype=np.float64)
        return b0[None, :] - self.cum_costs[:, 1 : 1 + len(b0)]


def integrate_costs(points, costs, speed: SpeedModel) -> np.ndarray:
    """Trapezoidal line integral of each K_i along a polyline.

    Each segment is traversed at the direction-dependent speed; rates are
    averaged between the segment endpoints (evaluated with the segment
    direction for anisotropic models).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    cum = np.zeros((n, len(costs)))
    for k in range(1, n):
        p, q = pts[k - 1], pts[k]
        seg = q - p
        ds = float(np.hypot(seg[0], seg[1]))
        if ds == 0.0:
            cum[k] = cum[k - 1]
            continue
        ca, sa = seg[0] / ds, seg[1] / ds
        f0 = speed.evaluate(p[0], p[1], ca, sa)
        f1 = speed.evaluate(q[0], q[1], ca, sa)
        for i, K in enumerate(costs):
            r0 = K.evaluate(p[0], p[1], ca, sa, speed) / f0
            r1 = K.evaluate(q[0], q[1], ca, sa, speed) / f1
            cum[k, i] = cum[k - 1, i] + 0.5 * (r0 + r1) * ds
    return cum


# ---------------------------------------------------------------------------
# validation of the standing assumptions


@dataclass
class Check:
    name: str
    passed: bool
    message: str


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            lines.append(f"[{'ok' if c.passed else 'FAIL'}] {c.name}: {c.message}")
        return "\n".join(lines)


def validate_problem(problem: ControlProblem, n_angles: int = 16) -> ValidationReport:
    """Report-only check of assumptions A0-A3 by grid/angle sampling."""
    checks = []
    obst = problem.obstacle_mask()

    # A0: each terminal cost has a finite minimum
    for i, term in enumerate(problem.terminals):
        m = term.min_value()
        checks.append(
            Check(
                f"A0 terminal {i}",
                math.isfinite(m),
                f"min q_{i} = {m}",
            )
        )

    # A2: 0 < k1 <= K_i <= k2 outside obstacles (+inf allowed for the primary)
    for i, cost in enumerate(problem.costs):
        vals = cost.grid_values(problem.grid, problem.speed)
        free = vals[~obst] if obst.any() else vals
        finite = free[np.isfinite(free)]
        has_inf = bool(np.isinf(free).any())
        k1 = float(finite.min()) if finite.size else INF
        k2 = float(finite.max()) if finite.size else INF
        ok = finite.size > 0 and k1 > 0 and (not has_inf or i == 0)
        msg = f"k1={k1:.6g}, k2={k2:.6g}"
        if has_inf:
            msg += "; +inf rates present" + ("" if i == 0 else " (secondary cost)")
        checks.append(Check(f"A2 cost {i}", ok, msg))

    # A1: finite local variation of f and K (heuristic Lipschitz probe)
    fvals = problem.speed.grid_values(problem.grid)
    lip = float(
        max(
            np.abs(np.diff(fvals, axis=0)).max(initial=0),
            np.abs(np.diff(fvals, axis=1)).max(initial=0),
        )
        / problem.grid.h
    )
    checks.append(Check("A1 speed variation", np.isfinite(lip), f"|df|/h <= {lip:.4g}"))

    # A3: positive speed in every sampled direction outside obstacles
    angs = np.linspace(0, 2 * math.pi, n_angles, endpoint=False)
    fmin = INF
    step = max(1, problem.grid.nx // 32)
    for ix in range(0, problem.grid.nx, step):
        for iy in range(0, problem.grid.ny, step):
            if obst[ix, iy]:
                continue
            x, y = problem.grid.point(ix, iy)
            for a in angs:
                fmin = min(fmin, problem.speed.evaluate(x, y, math.cos(a), math.sin(a)))
    checks.append(Check("A3 controllability", fmin > 0, f"min f = {fmin:.6g}"))

    return ValidationReport(checks)
