"""budgetmarch: grid solvers for optimal control under integral constraints.

Computes unconstrained value functions (semi-Lagrangian sweeping and fast
marching), restricted costs along otherwise-optimal trajectories, the
budget-augmented value function by explicit marching, constrained-optimal
trajectories, and Pareto fronts with a weighted-sum baseline.
"""

__version__ = "0.1.0"

from .augmented import (AugmentedField, MarchParams, MflSurface, build_mfl,
                        domain_reduction_report, march_augmented)
from .core import (INF, BudgetAxes, ConstantCost, ConstantSpeed,
                   ControlProblem, EllipticSpeed, Grid2, GriddedCost,
                   GriddedSpeed, Rect, RegionCost, ScalarField, SinusoidSpeed,
                   SpeedCost, TerminalCost, Trajectory, eval_anisotropic_speed,
                   integrate_costs, interpolate_bilinear, validate_problem)
from .errors import (BudgetMarchError, InfeasibleStartError, OutOfDomainError,
                     SweepConvergenceError, TrajectoryError,
                     TraversalLimitError, ValidationError)
from .pareto import (FrontComparison, ParetoFront, WeightMesh, compare_fronts,
                     extract_front, weighted_sum_front)
from .pipeline import SolveResult, solve_problem
from .restricted import solve_restricted
from .scenarios import Scenario, load_scenario, shipped_scenarios
from .static_solver import StaticSolveParams, fast_march_unit, solve_static
from .trajectory import follow_constrained, follow_static
from .visibility import (VisibilityResult, compute_visibility,
                         observability_cost, ray_visibility_oracle)

__all__ = [name for name in dir() if not name.startswith("_")]
