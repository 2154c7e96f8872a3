"""Exception hierarchy. Each family carries the CLI exit code it maps to."""


class GeocloseError(Exception):
    exit_code = 1


class ValidationError(GeocloseError, ValueError):
    exit_code = 2


class NumericalError(GeocloseError, ArithmeticError):
    exit_code = 3


class NoSolution(GeocloseError):
    exit_code = 4


class InvalidEllipsoid(ValidationError):
    pass


class NotOnSurface(ValidationError):
    pass


class DegenerateCoordinates(ValidationError):
    pass


class NotInRange(ValidationError):
    pass


class NegativeSquare(ValidationError):
    pass


class PoleAtSemiAxis(ValidationError):
    pass


class NotTangentToBase(ValidationError):
    pass


class DegenerateCaustic(ValidationError):
    pass


class EmptyBand(ValidationError):
    pass


class NonPositiveIntegrand(ValidationError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class StepRejected(NumericalError):
    pass


class NoSolutionInBracket(NoSolution):
    pass
