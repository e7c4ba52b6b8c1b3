"""Exception hierarchy.

Input problems derive from :class:`ValidationError` (CLI exit code 2);
numerical guards derive from :class:`NumericalGuardError` (exit code 3).
"""


class LoewnerError(Exception):
    """Base class for all package errors."""


class ValidationError(LoewnerError, ValueError):
    """An input violates a documented invariant."""


class OrderError(ValidationError):
    """A jet is too short for the requested coefficient extraction."""


class CompositionDomainError(ValidationError):
    """Composition with an inner jet that does not fix the origin."""


class PreconditionError(ValidationError):
    """An experiment gate was not passed (e.g. base control fails the PMP)."""


class NumericalGuardError(LoewnerError, ArithmeticError):
    """A numerical safety check tripped."""


class SingularJetError(NumericalGuardError):
    """Reciprocal of a jet with no nonzero coefficient."""


class StepRefinementError(NumericalGuardError):
    """Linear-coefficient drift exceeded tolerance; the step must be refined."""


class BlowupError(NumericalGuardError):
    """A pointwise trajectory left the open unit ball."""


class ConstraintError(NumericalGuardError):
    """A projection onto the validated control family failed."""
