"""Exception hierarchy shared across the package.

Each class carries the process exit code the CLI maps it to.
"""


class EfflenError(Exception):
    exit_code = 4


class DomainError(EfflenError, ValueError):
    """A numeric argument lies outside its admissible range."""

    exit_code = 2


class StructuralError(EfflenError, ValueError):
    """Shapes, names or blocklengths of the inputs do not line up."""

    exit_code = 2


class ConfigurationError(EfflenError, ValueError):
    exit_code = 2


class ResourceError(EfflenError):
    """An exhaustive computation would exceed its configured state-space cap."""

    exit_code = 3


class InvariantError(EfflenError):
    exit_code = 4
