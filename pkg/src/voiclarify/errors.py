"""Exception hierarchy shared across the package."""


class VoiError(Exception):
    """Base class for every error raised by voiclarify."""


# belief bookkeeping
class AllZero(VoiError, ValueError):
    pass


class NegativeWeight(VoiError, ValueError):
    pass


class NonFinite(VoiError, ValueError):
    pass


class ZeroEvidence(VoiError, ValueError):
    """The observed answer has zero probability under the current belief."""


class MissingLikelihoodRow(VoiError, KeyError):
    pass


# decision engine
class DimensionMismatch(VoiError, ValueError):
    pass


class EmptyActionSet(VoiError, ValueError):
    pass


class EstimatorFailure(VoiError, RuntimeError):
    """Raised by a belief backend when it cannot produce a valid estimate."""


# tasks
class MalformedMatrix(VoiError, ValueError):
    pass


class DegeneratePrior(VoiError, ValueError):
    pass


class EmptyCategory(VoiError, ValueError):
    pass


# LLM backend
class BackendUnavailable(EstimatorFailure):
    pass


class TransportError(EstimatorFailure):
    pass


class ParseFailure(EstimatorFailure):
    pass


class KeyMismatch(ParseFailure):
    pass


class ValueOutOfRange(ParseFailure):
    pass


class OutOfRangeSum(ParseFailure):
    pass


class UnknownLabel(ParseFailure):
    pass


class ConfidenceOutOfRange(ParseFailure):
    pass


# persistence
class SchemaVersionMismatch(VoiError, ValueError):
    pass
