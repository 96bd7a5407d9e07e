"""Exception types shared across the package."""


class SpendcyclesError(Exception):
    """Base class for all package errors."""


class ShapeError(SpendcyclesError):
    """Series lengths or array shapes do not satisfy an operation's contract."""


class ConfigError(SpendcyclesError):
    """A parameter, mapping or config file value is out of its valid range."""


class DegenerateSeriesError(SpendcyclesError):
    """Input series is constant, all-zero or otherwise unusable for a measure."""


class InputError(SpendcyclesError):
    """Structurally invalid input (empty stream, mismatched entity sets, ...)."""


class PrerequisiteError(SpendcyclesError):
    """A pipeline step was invoked before the step that produces its inputs."""
