"""Exception types shared across the package."""


class KswError(Exception):
    """Base class for every error raised by kswkit."""


class NoPrimeFound(KswError):
    pass


class DomainMismatch(KswError):
    pass


class BadSplit(KswError):
    pass


class BasisOverlap(KswError):
    pass


class MissingLimbs(KswError):
    pass


class BadWeight(KswError):
    pass


class LevelExhausted(KswError):
    pass


class LevelMismatch(KswError):
    pass


class BadExponent(KswError):
    pass


class InsufficientDepth(KswError):
    pass


class LevelUnderflow(KswError):
    pass


class UnknownKernel(KswError):
    pass


class CyclicGraph(KswError):
    pass


class ConfigError(KswError):
    pass
