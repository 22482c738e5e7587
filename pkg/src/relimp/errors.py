"""Exception hierarchy.

Validation problems (bad input) derive from ``ValidationError``; numerical
breakdowns (non-convergence, failed factorizations) from ``NumericalError``.
The CLI maps the two families to distinct exit codes.
"""


class RelimpError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RelimpError, ValueError):
    pass


class NumericalError(RelimpError, ArithmeticError):
    pass


class NotSquare(ValidationError):
    pass


class DiagonalNotUnit(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    def __init__(self, lambda_min, message=None):
        self.lambda_min = float(lambda_min)
        super().__init__(message or f"matrix is not positive definite (lambda_min={self.lambda_min:.3e})")


class OffDiagonalOutOfRange(ValidationError):
    pass


class RankDeficient(ValidationError):
    pass


class MissingValues(ValidationError):
    pass


class ResponseColumnNotFound(ValidationError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "response column not found"


class IndexOutOfRange(ValidationError, IndexError):
    pass


class DimensionMismatch(ValidationError):
    pass


class TooManyPredictors(ValidationError):
    pass


class InvalidR2(ValidationError):
    pass


class EmptyGroup(ValidationError):
    pass


class UnpairedGroup(ValidationError):
    pass


class SchemaMismatch(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class CholeskyFailure(NumericalError):
    pass


class DegenerateColumn(NumericalError):
    pass


class SamplerStuck(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, *, diag_residual=float("nan"), spectrum_residual=float("nan")):
        self.diag_residual = diag_residual
        self.spectrum_residual = spectrum_residual
        super().__init__(
            f"{message} (diag residual {diag_residual:.3e}, spectrum residual {spectrum_residual:.3e})"
        )


class AllTiedWarning(RuntimeWarning):
    """Kendall's tau is undefined because one of the rankings is constant."""


class ConvergenceWarning(RuntimeWarning):
    pass
