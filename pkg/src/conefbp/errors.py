"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """Input outside the documented domain of an operation."""


class PoleDegeneracyError(InvalidParameterError):
    """Spherical chart evaluated on the polar axis where it degenerates."""


class VertexSingularityError(InvalidParameterError):
    """Cartesian chart evaluated at the cone vertex."""


class PoleCollisionError(InvalidParameterError):
    """Angular range touches the pole at phi = pi."""


class NoZeroError(RuntimeError):
    """Profile has no sign change in the searched range."""


class PropertyViolationError(RuntimeError):
    """A computed profile violates a property required downstream."""


class InvalidBracketError(ValueError):
    """Bisection endpoints do not straddle a sign change."""


class InvalidTestFunctionError(ValueError):
    """Test function violates its support requirements."""


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


class ConvergenceFailureError(RuntimeError):
    """An iterative procedure failed to reach its tolerance.

    Carries the iteration log and, when available, the last iterate so
    callers can diagnose or salvage a failed run.
    """

    def __init__(self, message, log=None, iterate=None):
        super().__init__(message)
        self.log = list(log) if log is not None else []
        self.iterate = iterate
