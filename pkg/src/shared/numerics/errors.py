"""
Exception hierarchy for the numeric modules.

Hypothesis failures are reported through CheckReport entries, never raised. These
exceptions cover malformed inputs and computations that cannot proceed.
"""

from __future__ import annotations


class NumericsError(Exception):
    """Base class for every error raised by shared.numerics."""


class DimensionMismatchError(NumericsError, ValueError):
    pass


class NonFiniteValueError(NumericsError, ValueError):
    pass


class FieldBoundError(NumericsError):
    """A field returned a value outside its declared bounds."""


class MissingDerivativeError(NumericsError):
    """An evaluator needed a gradient or Hessian the field does not supply."""


class ExpressionError(NumericsError, ValueError):
    """Malformed expression string or evaluation outside its domain."""


class MeasureError(NumericsError, ValueError):
    """Invalid jump measure: atom at the origin, negative or non-finite weight."""


class IsaacsError(NumericsError):
    """Every minimizing control is excluded (infinite cost) at some state."""


class CouplingError(NumericsError):
    pass


class DoublingError(NumericsError):
    pass


class JensenSearchError(DoublingError):
    def __init__(self, message: str, log: list[dict] | None = None):
        super().__init__(message)
        self.log = log or []


class CloudTooCoarseError(DoublingError):
    pass


class SqueezeError(DoublingError):
    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}


class ResolventError(NumericsError):
    pass


class SingularSystemError(ResolventError):
    pass


class IsaacsCyclingError(ResolventError):
    pass


class DiscretizationError(ResolventError):
    pass
