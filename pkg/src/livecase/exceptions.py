"""Exception types shared across the engine."""


class RejectedInput(ValueError):
    """An operation was called with input outside its contract."""


class UnitMismatchError(RejectedInput):
    """An SPI and its telemetry (or a fault tree) use different exposure units."""


class ResolutionError(LookupError):
    """A dynamic link could not be resolved to an artifact version."""


class PlaceholderRateError(RejectedInput):
    """A fault tree still contains placeholder rates and cannot be quantified."""


class TreeTooLargeError(RejectedInput):
    """A fault tree exceeds the size limit of an exact algorithm."""


class JournalError(RuntimeError):
    """The evidence journal is corrupt beyond the recoverable tail."""


class StatusTransitionError(RejectedInput):
    """A hazard status change violates the status discipline."""
