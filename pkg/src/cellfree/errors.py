"""Exception types raised by the simulator."""


class CellFreeError(Exception):
    """Base class for all simulator errors."""


class InvalidConfigError(CellFreeError, ValueError):
    """A configuration value or operation argument is out of range."""


class InvalidStatsError(CellFreeError, ValueError):
    """Channel statistics violate a structural requirement."""


class NumericalError(CellFreeError, ArithmeticError):
    """A factorization or solve failed on a matrix that should be well posed."""
