"""Exception hierarchy shared by every subpackage."""


class MultitabError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(MultitabError, ValueError):
    """A precondition of an operation was violated by the caller."""


class ShapeError(ContractError):
    pass


class DegenerateRowError(MultitabError, ArithmeticError):
    """Softmax row with no finite entry (every key masked)."""


class NotPSDError(MultitabError, ValueError):
    pass


class InfeasibleError(MultitabError, ValueError):
    pass


class UndefinedMetricError(MultitabError, ValueError):
    pass


class FormatError(MultitabError, ValueError):
    """Malformed dataset or checkpoint on disk."""


class NumericFailure(MultitabError, ArithmeticError):
    pass


class ConfigError(MultitabError, ValueError):
    """Invalid run configuration; ``pointer`` is a JSON pointer into the document."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class ToleranceFailure(MultitabError):
    pass
