"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class WarpedG2Error(Exception):
    """Base class for all package errors."""


class NumericalError(WarpedG2Error):
    """A computation hit a singular or ill-defined configuration."""


class IntegrationError(NumericalError):
    """Base class for failures of the adaptive ODE integrator.

    ``trajectory`` holds every step accepted before the failure, so callers
    can still report a partial solution.
    """

    def __init__(self, message: str, t_last: float, trajectory=None):
        super().__init__(message)
        self.t_last = t_last
        self.trajectory = trajectory


class StepSizeUnderflow(IntegrationError):
    """The step size dropped below ``dt_min``: stiffness or finite-time blow-up."""


class MaxStepsExceeded(IntegrationError):
    """The integrator used up its step budget before reaching the end time."""


class SingularDenominator(NumericalError):
    """A formula divides by ``alpha + beta`` (or similar) where it vanishes."""


class NotCoClosed(NumericalError):
    """An operation requiring ``gamma == 0`` received torsion with ``gamma != 0``."""


class ZeroConformalFactor(NumericalError):
    """A conformal factor vanishes somewhere on the grid."""


class NonPeriodicConformalFactor(NumericalError):
    """On a circle the gauge-fixing factor is multivalued when the integral of gamma is nonzero."""


class DegenerateTorsion(NumericalError):
    """Reconstruction preconditions fail; use :func:`reconstruct_degenerate`."""


class NegativeRadicand(NumericalError):
    """``lambda**2 - h**2 * beta**2`` is not positive, so ``G`` is undefined."""


class NoBranchMatched(NumericalError):
    """No degenerate reconstruction branch (or more than one) matches the torsion."""


class BeyondBlowUp(NumericalError):
    """The separable Calabi-Yau solution was evaluated at or after its blow-up time."""


class SingularAtLZero(NumericalError):
    """The nearly Kaehler soliton system is only a constraint where ``l == 0``."""


class ConstraintOnly(NumericalError):
    """At ``k == 1`` the soliton system degenerates to the algebraic constraint ``alpha * l == 0``."""


class DomainError(NumericalError):
    """A closed-form solution family was evaluated outside its domain of validity."""


class ConfigError(WarpedG2Error):
    """Invalid run configuration (malformed JSON or schema violation)."""
