"""Exception hierarchy shared by all girkolab modules."""


class GirkolabError(Exception):
    """Base class for every error raised by girkolab."""


class ConfigurationError(GirkolabError, ValueError):
    """Invalid or unsupported configuration (unknown distribution kind, bad key, ...)."""


class DomainError(GirkolabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalError(GirkolabError, ArithmeticError):
    """A dense linear-algebra backend failed or produced an inconsistent result."""

    def __init__(self, message, **context):
        self.context = context
        if context:
            details = ", ".join(f"{k}={v!r}" for k, v in context.items())
            message = f"{message} ({details})"
        super().__init__(message)


class SolverError(NumericalError):
    """The scalar Dyson solver failed to bracket or converge."""


class AccuracyError(GirkolabError):
    """A quadrature error estimate exceeded its admissible budget."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)
