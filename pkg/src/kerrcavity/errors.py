"""Structured error types.

Every error carries a stable ``code`` (the class name) so the CLI can emit a
machine-readable record. Validation errors map to exit code 2, numerical
failures to exit code 3.
"""


class KerrCavityError(Exception):
    """Base class for all package errors."""

    exit_code = 1

    def __init__(self, message="", **details):
        super().__init__(message or self.__class__.__name__)
        self.details = details

    @property
    def code(self):
        return self.__class__.__name__

    def to_dict(self):
        out = {"error": self.code, "message": str(self)}
        for key, val in self.details.items():
            out[key] = val if isinstance(val, (int, float, str, bool, type(None))) else repr(val)
        return out


class ValidationError(KerrCavityError, ValueError):
    exit_code = 2


class NumericalError(KerrCavityError, RuntimeError):
    exit_code = 3


# parameter / config validation
class NonPositiveDecay(ValidationError):
    pass


class BadPumpIndex(ValidationError):
    pass


class NegativeThermalOccupancy(ValidationError):
    pass


class NonPositiveScale(ValidationError):
    pass


class BadModeCount(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


# mean field
class StepSizeUnderflow(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class TrajectoryTooShort(NumericalError):
    pass


class NotInLCPhase(NumericalError):
    pass


# bogoliubov
class FrameMismatch(NumericalError):
    pass


class SingularAtOmega(NumericalError):
    pass


class NonUnitaryBasis(NumericalError):
    pass


# wigner
class InsufficientSamples(NumericalError):
    pass


class EmptyGrid(NumericalError):
    pass


class NotStationary(NumericalError):
    pass


class EscapeRateExceeded(NumericalError):
    pass


# fock
class DimensionOverflow(NumericalError):
    pass


class DegenerateNullSpace(NumericalError):
    pass


class EigsNoConvergence(NumericalError):
    pass


class NormUnderflow(NumericalError):
    pass


class TruncationError(NumericalError):
    pass


class PropagationError(NumericalError):
    pass


# analysis
class FitDiverged(NumericalError):
    pass


class PeakAtBoundary(NumericalError):
    pass


class NonUniformGrid(NumericalError):
    pass


class NonPositiveEnvelope(NumericalError):
    pass
