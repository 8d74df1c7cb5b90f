"""finls: pseudospectral simulation and identity checks for the inhomogeneous
fractional nonlinear Schrodinger equation

    i u_t - (-Delta)^s u = -sign |x|^{-b} |u|^{p-1} u   on a periodic box.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConsistencyError,
    ContractViolation,
    ConvergenceError,
    DomainError,
    FinlsError,
    InsufficientDataError,
    NumericalFailure,
    QuadratureError,
    ValidationError,
    WindowTooLongError,
)
from .model import ModelParams, Sign, WeightField  # noqa: E402
from .spectral import Field, Grid  # noqa: E402

__all__ = [
    "__version__",
    "Grid",
    "Field",
    "ModelParams",
    "Sign",
    "WeightField",
    "FinlsError",
    "ContractViolation",
    "DomainError",
    "ValidationError",
    "ConsistencyError",
    "ConvergenceError",
    "NumericalFailure",
    "QuadratureError",
    "InsufficientDataError",
    "WindowTooLongError",
]
