"""Exception types raised across the package."""


class TernlutError(Exception):
    """Base class for all library errors."""


class ShapeError(TernlutError, ValueError):
    """A dimension violates a kernel or layout constraint."""


class OddRemainder(ShapeError):
    """Block-fitting split left an odd remainder that TL1 cannot pack."""


class InvalidTernary(TernlutError, ValueError):
    """A weight outside {-1, 0, 1} was given to a ternary packer."""


class AllZeroWeights(TernlutError, ValueError):
    pass


class CorruptBuffer(TernlutError, ValueError):
    """Packed bytes decode to an impossible index or code."""


class ModeMismatch(TernlutError, ValueError):
    """Lookup table kind/mode does not fit the requested kernel."""


class ConfigError(TernlutError, ValueError):
    pass
