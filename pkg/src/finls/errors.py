"""Exception types raised by finls.

Every error carries a short machine-readable ``reason`` code; the CLI maps the
classes onto process exit codes.
"""


class FinlsError(Exception):
    reason = "error"


class ContractViolation(FinlsError, TypeError):
    """An operation received a Field in the wrong representation (or similar)."""

    reason = "contract_violation"


class DomainError(FinlsError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""

    reason = "domain_error"


class ValidationError(FinlsError, ValueError):
    """Parameters or configuration failed admissibility checks."""

    reason = "validation_error"


class ConsistencyError(FinlsError, RuntimeError):
    reason = "internal_consistency"


class ConvergenceError(FinlsError, RuntimeError):
    """Fixed-point iteration failed; ``history`` holds per-iteration records."""

    reason = "convergence_failure"

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class NumericalFailure(FinlsError, RuntimeError):
    """Non-finite state during time stepping."""

    reason = "numerical_failure"

    def __init__(self, message, last_valid_time=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class QuadratureError(FinlsError, RuntimeError):
    reason = "quadrature_error"


class InsufficientDataError(FinlsError, ValueError):
    reason = "insufficient_data"


class WindowTooLongError(FinlsError, ValueError):
    reason = "window_too_long"
