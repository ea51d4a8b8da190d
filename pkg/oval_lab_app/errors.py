"""
Exception hierarchy for Oval Lab.

Every failure a computation can report is one of the classes below. They all
derive from `ValueError`, so callers that validate with `except ValueError`
keep working, and the CLI can map them onto exit codes in one place:
`UsageError` means the caller asked for something invalid (exit code 3),
anything else is a numerical or runtime failure (exit code 2).
"""


class OvalLabError(ValueError):
    """Base class for all Oval Lab errors."""

    exit_code = 2


class UsageError(OvalLabError):
    """Invalid arguments, mismatched grids, bad configuration values."""

    exit_code = 3


class IntegrationError(OvalLabError):
    """An ODE integration produced a non-finite state."""


class FoliationViolation(OvalLabError):
    """Two leaves of the atlas cross inside the foliated region."""

    def __init__(self, message: str, pair: tuple = ()):
        super().__init__(message)
        self.pair = pair


class DomainError(OvalLabError):
    """A query point lies outside the region where an object is defined."""


class InvalidStateError(OvalLabError):
    """A curve or profile violates its structural invariants."""


class StepRejected(OvalLabError):
    """A time step broke the node ordering; retry with a smaller step."""


class QuadratureError(OvalLabError):
    """A quadrature identity failed beyond its tolerance."""


class RegimeError(OvalLabError):
    """A series is not in the regime an estimator assumes."""


class HypothesisViolation(OvalLabError):
    """The hypothesis of a conditional estimate does not hold."""


class AnsatzError(OvalLabError):
    """The glued ancient-oval ansatz failed its concavity check."""


class ResolutionError(OvalLabError):
    """Too few samples inside a window to make a meaningful comparison."""
