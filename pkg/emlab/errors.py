"""
emlab — Error Types
One hierarchy for every failure the laboratory reports, with the CLI exit code attached.
"""

EXIT_OK = 0
EXIT_INVARIANT_FAILURE = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3


class EmlabError(Exception):
    """Base class. `exit_code` is what the CLI returns when this escapes a suite."""

    exit_code = EXIT_RESOURCE


class InvalidArgument(EmlabError, ValueError):
    """An operation was called outside its precondition."""


class ConfigError(InvalidArgument):
    """Malformed command line or config file."""

    exit_code = EXIT_USAGE


class ResolutionError(InvalidArgument):
    """A grid or quadrature is too coarse for the frequencies it must resolve."""


class ResourceLimitError(EmlabError):
    """A computation would exceed its configured size budget."""


class UndefinedGradientError(InvalidArgument):
    """Gradient requested where the field is not differentiable."""


class ZeroAverageError(InvalidArgument):
    """A weight has zero average on one member of an interval family."""

    def __init__(self, message: str, member: tuple[float, float]):
        super().__init__(message)
        self.member = member


class ConvergenceError(EmlabError):
    """Iterative solver hit its iteration cap."""

    def __init__(self, message: str, residual_history: list[float]):
        super().__init__(message)
        self.residual_history = residual_history


class DegenerateCellError(EmlabError):
    """A Poisson-kernel cell is not strictly positive."""

    exit_code = EXIT_INVARIANT_FAILURE

    def __init__(self, message: str, x: float, value: float):
        super().__init__(message)
        self.x = x
        self.value = value


class SuiteError(EmlabError):
    """Wraps a lower-module error with the suite it escaped from."""

    def __init__(self, suite: str, cause: EmlabError):
        super().__init__(f"{suite} suite failed: {cause}")
        self.suite = suite
        self.exit_code = cause.exit_code
