"""Exception hierarchy shared by all solvers and the CLI."""


class ParamGuideError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(ParamGuideError, ValueError):
    """Malformed configuration or out-of-range physical parameter."""


class InvalidParameterError(ConfigError):
    """A single parameter violates its domain (e.g. nonpositive velocity)."""


class DegenerateVelocityError(ConfigError):
    """Operation needs distinct TE/TM group velocities."""


class AccuracyError(ParamGuideError, ArithmeticError):
    """A numerical error estimate exceeded its tolerance."""


class RegimeError(ParamGuideError, ValueError):
    """Input lies outside the regime an operation is valid for."""


class UnsupportedRegimeError(RegimeError):
    """Closed form not available for this regime; a numerical path exists."""


class TruncationError(AccuracyError):
    """Fock-space truncation leaked more probability than allowed."""

    def __init__(self, message, suggested_nmax=None):
        super().__init__(message)
        self.suggested_nmax = suggested_nmax


class RangeError(ParamGuideError, ValueError):
    """Requested window lies outside the sampled grid."""


class PreconditionError(ParamGuideError, ValueError):
    """Caller violated an operation's precondition."""
