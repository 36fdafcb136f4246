"""Exception types shared across the package."""


class KinboundsError(Exception):
    """Base class for all package-specific errors."""


class NetworkSyntaxError(KinboundsError):
    """Malformed network file; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownSpecies(KinboundsError):
    """A reaction or target references a species that was never declared."""

    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown species {name!r}")


class NonPositiveRate(KinboundsError):
    """Rate constants must be strictly positive."""


class BadProbability(KinboundsError):
    """Initial probabilities must be positive and sum to one."""


class InconsistentInvariants(KinboundsError):
    """Initial support states disagree on the conserved quantities."""


class SingularChoice(KinboundsError):
    """The requested independent-species choice leaves a singular basis."""


class NoValidChoice(KinboundsError):
    """No subset of species yields an invertible dependent basis."""


class OrderOverflow(KinboundsError):
    """A moment-equation term exceeded the highest tracked order."""


class MissingMoment(KinboundsError):
    """A matrix cell addresses a moment outside the decision vector."""


class UnsupportedSense(KinboundsError):
    """Requested bound direction is not available for this statistic."""


class ValidationError(KinboundsError):
    """A problem handed to the solver is structurally malformed."""


class StateCapExceeded(KinboundsError):
    """Reachable-state enumeration outgrew the configured cap."""


class TooLargeForDense(KinboundsError):
    """State space too large for a dense eigenvalue decomposition."""
