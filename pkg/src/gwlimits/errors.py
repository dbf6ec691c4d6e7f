"""Exception hierarchy for gwlimits.

Every failure mode raised by the library derives from :class:`GWError`.
Construction errors (bad offspring laws) and domain errors (arguments
outside a function's mathematical domain) are separate subtrees so
callers can distinguish "bad model" from "bad query".
"""


class GWError(Exception):
    """Base class for all gwlimits errors."""


class LawError(GWError):
    """Invalid offspring-law specification."""


class NegativeMassError(LawError):
    pass


class MassSumToleranceError(LawError):
    """Masses do not sum to 1 within the accepted input tolerance."""


class SubcriticalError(LawError):
    """Offspring mean is <= 1; the library only models supercritical laws."""


class DegenerateError(LawError):
    """All mass at offspring count 0."""


class DomainError(GWError):
    """Argument outside the mathematical domain of an operation."""


class OutsideUnitDiscError(DomainError):
    pass


class SAtOrBeyondOneError(DomainError):
    pass


class SOutOfRangeError(DomainError):
    pass


class VTooLargeError(DomainError):
    """v exceeds the m^n range required by the local limit theorem."""


class VBeyondCapError(DomainError):
    """v exceeds the truncation cap of a generation pmf."""


class NotPowerOfTwoError(DomainError):
    pass


class BoettcherLawError(DomainError):
    """Operation requires a Schroeder law (gamma > 0)."""


class SchroederLawError(DomainError):
    """Operation requires a Boettcher law (minimal family size >= 2)."""


class EmptyConditioningEventError(DomainError):
    """The conditioning event Z_{n-k} >= v has probability zero."""


class NumericalError(GWError):
    """A numerical procedure failed to meet its own quality contract."""


class NoConvergenceError(NumericalError):
    pass


class SeriesConsistencyError(NumericalError):
    """Truncated-series arithmetic produced a clearly non-roundoff negative."""


class CapTooSmallError(NumericalError):
    """Truncation cap leaves too much unaccounted tail mass for an exact result."""


class SimulationError(GWError):
    """Monte Carlo failure modes."""


class CapExceededError(SimulationError):
    """A generation exceeded the configured population cap."""


class NoSurvivorsError(SimulationError):
    pass


class NoHitsError(SimulationError):
    pass


class AcceptanceTooLowError(SimulationError):
    """Rejection-sampling acceptance rate below the usability floor."""
