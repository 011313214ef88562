"""Exception hierarchy shared by all resograph modules."""


class ResographError(Exception):
    """Base class for every error raised by the toolkit."""


class GraphError(ResographError):
    """Structural or validation problem in a graph description."""


class StructuralError(GraphError):
    pass


class ValidationError(GraphError):
    pass


class GraphFileError(GraphError):
    """Malformed graph definition file. ``where`` names the line or field."""

    def __init__(self, message, where=None):
        self.where = where
        if where:
            message = f"{where}: {message}"
        super().__init__(message)


class NumericalError(ResographError):
    """A numerical procedure could not deliver a trustworthy answer."""


class SingularExterior(NumericalError):
    pass


class SingularAtK(NumericalError):
    """The interior system is singular: k sits on a resonance or eigenvalue."""


class DivisorVanishes(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class DerivativeVanishes(NumericalError):
    pass


class ZeroOnContour(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class LostPole(NumericalError):
    pass


class StepUnderflow(NumericalError):
    pass


class PoleOfBeta(NumericalError):
    pass


class VanishingCoefficient(NumericalError):
    pass


class InsufficientSamples(NumericalError):
    pass


class UndefinedAngle(NumericalError):
    pass
