"""Exception hierarchy shared by all stargraph modules."""


class StarGraphError(Exception):
    """Base class; every error raised on purpose by the package derives from it."""

    module = "stargraph"


class ConfigSchemaError(StarGraphError, ValueError):
    """A configuration document does not match the JSON schema.

    ``path`` holds the location of the offending field, e.g. ``potential.segments.0``.
    """

    module = "graph-model"

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ValidationError(StarGraphError, ValueError):
    """A domain invariant is violated (negative length, non-symmetric potential, ...)."""

    module = "graph-model"


class DomainError(StarGraphError, ValueError):
    """An argument lies outside the domain of the operation."""

    module = "graph-model"


class ConditioningError(StarGraphError, ArithmeticError):
    """A numerical step cannot be carried out at the requested tolerance."""

    module = "resonance"


class SingularSystemError(StarGraphError, ArithmeticError):
    """A linear system that should be uniquely solvable is numerically singular."""

    module = "limit-coupling"


class RateFitError(StarGraphError, ValueError):
    """Convergence data is unsuitable for a rate fit."""

    module = "resolvent-lab"
