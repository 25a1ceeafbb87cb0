"""Exception taxonomy shared across the library.

The CLI maps these onto exit codes: ConfigError -> 2, everything else -> 1.
"""


class ClassRegError(Exception):
    """Base class for all library errors."""


class ShapeError(ClassRegError, ValueError):
    """Tensor extents are inconsistent with an operation's contract."""


class ConfigError(ClassRegError, ValueError):
    """Invalid configuration value, file, or schema."""


class FormatError(ClassRegError, ValueError):
    """Malformed or truncated on-disk artifact (checkpoint, clip dump)."""


class InputError(ClassRegError, ValueError):
    """Out-of-range runtime input (labels, class indices)."""


class StateError(ClassRegError, RuntimeError):
    """Operation called in an invalid order (e.g. backward before forward)."""
