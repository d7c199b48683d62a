"""Exception hierarchy shared across the workbench."""


class FreqShieldError(Exception):
    """Base class for all workbench errors."""


class ImageIOError(FreqShieldError, OSError):
    """Missing, unreadable or unwritable file."""


class FormatError(FreqShieldError, ValueError):
    """Unsupported pixel format (16-bit, CMYK, palette with alpha...)."""


class SpaceError(FreqShieldError, ValueError):
    """Operation called on an image in the wrong color space."""


class CapacityError(FreqShieldError, ValueError):
    """Carrier too small for the requested embedding."""


class ShapeError(FreqShieldError, ValueError):
    """Mismatched tensor / image dimensions."""


class BatchTooSmall(FreqShieldError, ValueError):
    """Batch statistics requested on a batch of one."""


class UnknownAlgorithm(FreqShieldError, KeyError):
    """Algorithm tag not present in a manifest or not supported."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown algorithm"


class EmptyTrainSet(FreqShieldError, ValueError):
    """Training view has no samples left."""


class EmptyTestSet(FreqShieldError, ValueError):
    """Evaluation requested on an empty record set."""
