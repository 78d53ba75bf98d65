"""
Exception hierarchy for Pseudospherical Lab

Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class PssError(Exception):
    """Base error for the lab"""
    exit_code = 2


class ParameterError(PssError, ValueError):
    """Invalid parameters or configuration"""
    exit_code = 2


class JetOrderError(ParameterError):
    """A derivative left the supported jet range"""


class MissingRuleError(ParameterError):
    """A derivative of the pseudo-potential was requested without a rule"""


class UnboundSymbolError(ParameterError):
    """A compiled or evaluated expression still holds an unbound symbol"""

    def __init__(self, symbols):
        self.symbols = tuple(sorted(symbols))
        super().__init__(f"Unbound symbols: {', '.join(self.symbols)}")


class GuardStop(PssError):
    """A runtime guard stopped a computation"""
    exit_code = 3

    def __init__(self, reason: str, message: Optional[str] = None, **details):
        self.reason = reason
        self.details = details
        super().__init__(message or reason)


class GuardedDivisionError(GuardStop):
    """Division by a value below the configured threshold"""

    def __init__(self, index, value: float, eps: float):
        self.index = index
        self.value = value
        self.eps = eps
        super().__init__(
            "guarded_division",
            f"Division by |{value:.3e}| < {eps:.1e} at index {index}",
            index=index,
        )


class VerificationFailure(PssError):
    """One or more checks of a report failed"""
    exit_code = 1

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__(f"Failed checks: {', '.join(self.failed)}")
