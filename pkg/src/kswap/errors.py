"""Exception hierarchy shared across the toolkit."""


class KswapError(Exception):
    """Base class for all toolkit errors."""


class VolumeError(KswapError):
    """Raised for invalid volume data or a broken on-disk volume."""


class ShapeMismatchError(KswapError):
    """Raised when two arrays that must share a shape do not."""
