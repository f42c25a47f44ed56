"""Exception hierarchy shared by all modules."""


class MaskBFError(Exception):
    """Base class for errors raised by maskbf."""


class InvalidInput(MaskBFError, ValueError):
    """An argument has the wrong shape, length or content."""


class InvalidConfig(MaskBFError, ValueError):
    """A configuration value is out of range or inconsistent."""


class ConstraintViolation(MaskBFError, ValueError):
    """A mask or weight violates a nonnegativity constraint."""


class NumericalError(MaskBFError, ArithmeticError):
    """A matrix factorization or eigenproblem failed."""


class DatasetError(MaskBFError, OSError):
    """Dataset files are missing or inconsistent."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
