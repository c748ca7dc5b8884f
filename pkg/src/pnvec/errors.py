"""Exception types raised across the package."""


class PnvecError(Exception):
    """Base class for all package errors."""


class ParseError(PnvecError):
    """Input is not well-formed PNML/XML."""


class StructureError(PnvecError):
    """A net or corpus breaks a structural invariant."""


class IoError(PnvecError, OSError):
    """Reading or writing dataset files failed."""


class EmptyCorpus(PnvecError):
    pass


class UnknownToken(PnvecError, KeyError):
    """A task token or model id is not in the vocabulary."""

    def __str__(self):
        return Exception.__str__(self)


class CannotSample(PnvecError):
    pass


class DegenerateVector(PnvecError, ValueError):
    """Cosine distance is undefined for an all-zero vector."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TooFewPoints(PnvecError, ValueError):
    pass


class UndefinedSilhouette(PnvecError, ValueError):
    pass


class StratifyError(PnvecError, ValueError):
    pass


class SingleClass(PnvecError, ValueError):
    pass


class NoVariance(PnvecError, ValueError):
    pass
