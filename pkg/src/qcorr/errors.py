"""Exception hierarchy shared by every module."""


class QCorrError(ValueError):
    """Base class for all validation and numerical errors raised by qcorr."""


class NotSquare(QCorrError):
    pass


class NotHermitian(QCorrError):
    pass


class NotPSD(QCorrError):
    pass


class NotNormalized(QCorrError):
    pass


class DimensionMismatch(QCorrError):
    pass


class UnknownLabel(QCorrError):
    pass


class LayoutMismatch(QCorrError):
    pass


class NonOrthonormalBasis(QCorrError):
    pass


class IncompleteBasis(QCorrError):
    pass


class BasisMismatch(QCorrError):
    pass


class BadDistribution(QCorrError):
    pass


class BadRank(QCorrError):
    pass


class BadParameter(QCorrError):
    pass


class BadLength(QCorrError):
    pass


class BadIsometry(QCorrError):
    pass


class AncillaTooSmall(QCorrError):
    pass


class NonFinite(QCorrError):
    pass


class WrongArity(QCorrError):
    pass


class TooManyHypotheses(QCorrError):
    pass


class ParseError(QCorrError):
    pass


class UnknownMeasure(QCorrError):
    pass


class UnknownSuite(QCorrError):
    pass
