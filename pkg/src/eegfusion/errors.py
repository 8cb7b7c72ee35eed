"""Exception hierarchy shared across the package.

Each class maps to one CLI exit code so failures can be scripted against:
usage/parameter problems exit 1, bad input data exits 2, solver
non-convergence exits 3, and internal invariant violations exit 4.
"""


class EegFusionError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class UsageError(EegFusionError):
    """Malformed command line or config file."""

    exit_code = 1


class ParameterError(EegFusionError, ValueError):
    """A caller-supplied argument is out of range or inconsistent."""

    exit_code = 1


class DataError(EegFusionError, ValueError):
    """Input data violates a contract (non-finite sample, missing file, ...)."""

    exit_code = 2


class StateError(EegFusionError, RuntimeError):
    """An operation was invoked before its preconditions were established."""

    exit_code = 4


class ConvergenceError(EegFusionError, RuntimeError):
    """An iterative solver exhausted its budget before reaching tolerance.

    ``diagnostics`` carries best-so-far state for post-mortems.
    """

    exit_code = 3

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SearchError(ConvergenceError):
    """A stochastic search finished without any valid candidate."""


class NumericError(EegFusionError, ArithmeticError):
    """A numerical quantity became non-finite where the algorithm needs it."""

    exit_code = 4


class InternalError(EegFusionError, AssertionError):
    """A must-be-impossible invariant was violated (e.g. the leakage guard)."""

    exit_code = 4
