"""Exception hierarchy shared by all moilab modules."""


class MoilabError(Exception):
    """Base class for errors raised by moilab."""


class DomainError(MoilabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(MoilabError, ValueError):
    """A structural precondition (sign, invertibility, admissibility) fails."""


class ConstructionError(MoilabError):
    """A derived object could not be built from the supplied specification."""


class EigenSolverError(MoilabError):
    """The dense Hermitian eigensolver failed."""
