"""Exception hierarchy shared by all quadscan modules."""


class QuadscanError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(QuadscanError):
    """Tensor shapes incompatible with the requested operation."""


class ContractError(QuadscanError):
    """An operation was called outside its contract (bad mode, missing state, ...)."""


class GeometryError(QuadscanError):
    """Token geometry does not admit the requested scan decomposition."""


class NumericError(QuadscanError):
    """Non-finite values encountered where finite values are required."""


class ConfigError(QuadscanError):
    """Invalid configuration file, key, or value."""


class DataFormatError(QuadscanError):
    """On-disk data (images, annotations, manifests) failed to parse."""


class InputError(QuadscanError):
    """Caller-supplied data violates a precondition (degenerate box, resolution mismatch, ...)."""
