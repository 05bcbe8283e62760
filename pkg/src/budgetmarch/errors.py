"""Exception types raised by the solver suite."""


class BudgetMarchError(Exception):
    """Base class for all package errors."""


class OutOfDomainError(BudgetMarchError):
    """A position falls outside the unit square."""


class ValidationError(BudgetMarchError):
    """A problem definition violates the standing assumptions."""


class SweepConvergenceError(BudgetMarchError):
    """Gauss-Seidel sweeping failed to reach tolerance within the sweep cap.

    Carries the residual field (per-point magnitude of the last update).
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class TraversalLimitError(BudgetMarchError):
    """A ray walk exceeded the cell-traversal safety cap."""

    def __init__(self, message, gridpoint=None, angle=None):
        super().__init__(message)
        self.gridpoint = gridpoint
        self.angle = angle


class InfeasibleStartError(BudgetMarchError):
    """Trajectory reconstruction was asked to start at an infeasible state."""


class TrajectoryError(BudgetMarchError):
    """Trajectory reconstruction failed; carries the partial path."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
