"""Exception types shared across the solver."""


class StefanCutError(Exception):
    """Base class for all solver errors."""


class StencilInvalid(StefanCutError):
    """A required interpolation stencil cell is masked out."""


class CflViolation(StefanCutError):
    """Advection timestep exceeds dx / max|v|."""


class DegenerateGradient(StefanCutError):
    """Level-set gradient too small to define a normal."""


class MissingFlux(StefanCutError):
    """A face with nonzero fraction has no flux value."""


class InsufficientStencil(StefanCutError):
    """Embedded gradient could not assemble even the fallback stencil."""


class SolverDiverged(StefanCutError):
    """Iterative linear solve failed to meet the residual tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NoConvergence(StefanCutError):
    """Velocity extension correction loop failed to converge (non-fatal)."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TimestepViolation(StefanCutError):
    """A cell flipped fully-covered <-> fully-uncovered in one step."""


class EmptyInterface(StefanCutError):
    """No zero level set found where one was required."""


class DomainError(StefanCutError):
    """Argument outside the mathematical domain of a special function."""


class NoRoot(StefanCutError):
    """Bracketed root find failed: no sign change in the bracket."""


class ParseError(StefanCutError):
    """Config file syntax error."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(StefanCutError):
    """Config semantically invalid (bad parameter value)."""
