"""Exception hierarchy shared across the library.

The CLI maps these onto exit codes: input/config problems exit 1,
numeric failures exit 2.
"""


class AdavsrError(Exception):
    """Base class for all library errors."""


class ShapeError(AdavsrError):
    """Tensor shapes do not satisfy an operation's contract."""


class InputError(AdavsrError):
    """Caller-supplied data violates a precondition (bad lengths, empty
    reference, malformed file, ...)."""


class ConfigError(AdavsrError):
    """A configuration value is out of range or a config file is malformed."""


class NumericError(AdavsrError):
    """A numeric invariant broke: NaN/Inf escaped an op, training diverged."""


class InfeasibleTargetError(NumericError):
    """A CTC target cannot be aligned to the available number of frames."""
