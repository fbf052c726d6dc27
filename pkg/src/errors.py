"""
Exception hierarchy for the Floquet analyzer.

Every failure raised on purpose by the library derives from FloquetError so the
command line front end can map it to an exit code in one place.
"""

import numpy as np


class FloquetError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class ConfigError(FloquetError):
    """Invalid system description (unknown key, bad dimension, bad type)."""

    exit_code = 2


class ExpressionSyntaxError(FloquetError):
    """Expression text could not be parsed.

    Attributes:
        offset: Byte offset into the source where parsing failed
    """

    exit_code = 2

    def __init__(self, message, offset=0):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExpressionSyntaxError):
    """Identifier other than t, pi, e or a known function."""


class DomainError(FloquetError, ValueError):
    """Expression evaluated outside its domain."""


class NotInTimeScaleError(FloquetError, ValueError):
    """A time was requested that is not an element of the time scale."""


class NonRegressiveError(FloquetError):
    """1 + mu*z vanished (scalar) or I + mu*A became singular (matrix)."""


class SingularMatrixError(FloquetError, np.linalg.LinAlgError):
    """Matrix too close to singular for a power, logarithm or inverse."""


class ConvergenceError(FloquetError):
    """Integrator could not meet its tolerance above the step floor."""


class ResonanceError(FloquetError):
    """I - M is singular, so the forced problem has no unique periodic state.

    Attributes:
        homogeneous_state: A periodic initial state of the unforced system, if found
    """

    def __init__(self, message, homogeneous_state=None):
        super().__init__(message)
        self.homogeneous_state = homogeneous_state
