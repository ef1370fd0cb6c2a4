"""Exception hierarchy shared by every module."""


class FracContainError(Exception):
    """Base class for all package errors."""


class ArgumentError(FracContainError, ValueError):
    pass


class RoleError(ArgumentError):
    """A leader was passed where a follower is required (or vice versa)."""


class UnsupportedDimensionError(ArgumentError):
    pass


class NumericFailure(FracContainError, ArithmeticError):
    """A series or iteration did not converge within its budget."""

    def __init__(self, message, partial_sum=None, terms=None):
        super().__init__(message)
        self.partial_sum = partial_sum
        self.terms = terms


class UndefinedPointError(FracContainError, ArithmeticError):
    """The potential is evaluated where it has no definition (gamma = beta = 0)."""


class DegenerateRowError(FracContainError, ArithmeticError):
    pass


class ConstraintViolation(FracContainError):
    """An access edge has non-positive margin delta - S_ij."""

    def __init__(self, message, edge=None, margin=None):
        super().__init__(message)
        self.edge = edge
        self.margin = margin


class SimulationAborted(FracContainError):
    """Base for errors that stop a run; carries the partial trajectory."""

    def __init__(self, message, step=None, trajectory=None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory


class BarrierBreach(SimulationAborted):
    def __init__(self, message, step=None, edge=None, margin=None, trajectory=None):
        super().__init__(message, step=step, trajectory=trajectory)
        self.edge = edge
        self.margin = margin


class DivergenceError(SimulationAborted):
    pass


class StepSizeError(SimulationAborted):
    """Sampling period too large for the convex-combination update."""


class ValidationError(FracContainError, ValueError):
    """Scenario validation failed; ``errors`` lists ``(field_path, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.errors)
        super().__init__(f"invalid scenario: {lines}")
