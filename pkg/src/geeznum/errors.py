"""Exception hierarchy shared by every stage of the pipeline."""


class GeezError(Exception):
    """Base class for all domain errors raised by this package."""


class DimensionError(GeezError, ValueError):
    pass


class PolarityError(GeezError, ValueError):
    pass


class EmptyContentError(GeezError, ValueError):
    """A scan contains no ink pixels after binarization."""


class LabelError(GeezError, ValueError):
    pass


class DecodeError(GeezError, ValueError):
    pass


class EmptyDatasetError(GeezError, ValueError):
    pass


class SplitError(GeezError, ValueError):
    pass


class PerturbationError(GeezError, RuntimeError):
    pass


class FormatError(GeezError, ValueError):
    """Malformed file. ``offset`` is the byte position of the problem, if known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IntegrityError(GeezError, ValueError):
    """Sidecar metadata does not match the file or config it describes."""


class LineSearchError(GeezError, RuntimeError):
    pass


class NonDescentError(LineSearchError):
    pass


class StallError(LineSearchError):
    pass


class OptimizerAbort(GeezError, RuntimeError):
    pass
