"""Exception hierarchy shared by every module.

Each class maps to one CLI exit code (see ``cli.EXIT_CODES``).
"""


class SnnWhitenError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SnnWhitenError, ValueError):
    pass


class ContractError(SnnWhitenError, ValueError):
    """An input violates a documented precondition (range, symmetry...)."""


class InsufficientDataError(SnnWhitenError, ValueError):
    pass


class ConvergenceError(SnnWhitenError, RuntimeError):
    pass


class FormatError(SnnWhitenError, ValueError):
    """A dataset or container file is missing, truncated or malformed."""


class DataError(SnnWhitenError, ValueError):
    """Training data does not meet a learner's requirements."""


class ConfigError(SnnWhitenError, ValueError):
    pass
