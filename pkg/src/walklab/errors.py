"""Exception hierarchy shared by all walklab modules."""


class WalklabError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(WalklabError):
    """Invalid arguments or violated preconditions."""


class ModelMismatchError(UsageError):
    """Operands belong to different group models."""


class ResourceBudgetError(WalklabError):
    """An enumeration or convolution exceeded its element budget.

    ``partial`` carries whatever was achieved before the budget ran out
    (e.g. the last fully enumerated radius).
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class RecurrentWalkError(WalklabError):
    """The walk looks recurrent, so Green-function machinery refuses to run."""


class InsufficientTruncationError(WalklabError):
    """A Green lower bracket is zero; raise the truncation order or radius."""


class NumericError(WalklabError):
    """Internal numerical failure (singular system, non-finite value)."""
