"""Exception hierarchy shared by every module."""


class UltraflatError(Exception):
    """Base class for all library errors."""


class DegeneratePrefixError(UltraflatError, ValueError):
    pass


class ParameterError(UltraflatError, ValueError):
    pass


class DomainError(UltraflatError, ValueError):
    """Evaluation point lies outside the region where the result is exact."""


class PrefixExhaustedError(DomainError):
    pass


class ConsistencyError(UltraflatError, RuntimeError):
    """Two independent constructions of the same object disagree."""


class CannotStrictifyError(UltraflatError, ValueError):
    pass


class NonQuasianalyticError(UltraflatError, ValueError):
    """A tail integral of sigma(t)/t^2 cannot be controlled."""


class NqViolationError(NonQuasianalyticError):
    """The check-sequence fails the summability precondition."""


class PreconditionError(UltraflatError, ValueError):
    pass


class SectorError(UltraflatError, ValueError):
    pass


class KernelDecayError(UltraflatError, ValueError):
    pass


class QuadratureError(UltraflatError, RuntimeError):
    pass


class SpecError(UltraflatError, ValueError):
    """Malformed JSON specification."""


class UncertifiedTailWarning(UserWarning):
    """An integral tail was extrapolated rather than enclosed."""
