"""Exception hierarchy shared by all modules."""


class CollisionNormError(Exception):
    """Base class for every error raised by this package."""


class SolverFailure(CollisionNormError):
    """A numerical kernel could not produce a trustworthy answer."""


class SingularMatrix(SolverFailure):
    pass


class NotSymmetric(CollisionNormError, ValueError):
    pass


class NoStabilizingSolution(SolverFailure):
    pass


class NormDoesNotExist(CollisionNormError):
    """The requested system norm is infinite or undefined for this model."""


class MissingDerivativeOutput(NormDoesNotExist):
    pass


class ImproperTF(CollisionNormError, ValueError):
    pass


class PoleEvaluation(CollisionNormError, ZeroDivisionError):
    pass


class ZeroNumerator(CollisionNormError, ValueError):
    pass


class DirectFeedthrough(NormDoesNotExist):
    pass


class Unstable(NormDoesNotExist):
    pass


class UnstableClosedLoop(NormDoesNotExist):
    pass


class UnknownChannel(CollisionNormError, KeyError):
    pass


class InvalidParams(CollisionNormError, ValueError):
    pass


class ConfigError(CollisionNormError, ValueError):
    pass
