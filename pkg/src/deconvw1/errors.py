"""Exception types shared across the package."""


class DeconvError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(DeconvError):
    """A measure or vector has the wrong dimension for the operation."""


class NotUnitVector(DeconvError):
    """A projection direction is not normalized."""


class GridMismatch(DeconvError):
    """Two grid functions do not share origin/step/length."""


class GridTooNarrow(DeconvError):
    """The grid does not contain the numerically relevant support."""


class TooLarge(DeconvError):
    """Problem size exceeds the cap of an exact small-instance solver."""


class UnsupportedModel(DeconvError):
    """The requested operation is not available for this noise model."""


class DomainError(DeconvError):
    """Evaluation requested at a point where the quantity is undefined."""


class SpectralDivergence(DeconvError):
    """A frequency-weighted spectrum fails the finiteness check."""


class BandTooWide(DeconvError):
    """The estimator's active frequency band exceeds the grid Nyquist limit."""


class ImagTooLarge(DeconvError):
    """An inverse transform that should be real has a large imaginary part."""


class EmptyChain(DeconvError):
    """A posterior summary was requested from a chain with no kept states."""


class NumericalUnderflow(DeconvError):
    """A sampler sub-step underflowed and could not be retried."""


class TooFewPoints(DeconvError):
    """Not enough distinct points for a regression fit."""


class ConfigError(DeconvError):
    """An experiment configuration is invalid."""


class PreconditionViolated(DeconvError):
    """A documented precondition of a verifier does not hold."""


class SupportMismatch(DeconvError):
    """The reference density vanishes where the compared density does not."""
