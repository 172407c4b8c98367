"""Exception types raised across the pipeline."""

from __future__ import annotations


class TraceReconError(Exception):
    """Base class for every error this package raises deliberately."""


class MalformedInput(TraceReconError):
    def __init__(self, message: str, offset: int | None = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class UnknownRecordKind(TraceReconError):
    def __init__(self, kind: str) -> None:
        self.kind = kind
        super().__init__(f"record kind {kind!r} has no mapping to a fragment kind")


class EmptyAnchor(TraceReconError):
    """The anchor produced zero decision-relevant fragments."""


class NoDecisionEvent(TraceReconError):
    """The anchor holds no tool_call, so there is nothing to classify."""


class UnknownPattern(TraceReconError):
    pass


class DuplicateColumn(TraceReconError):
    pass


class MissingColumn(TraceReconError):
    pass


class IoFailure(TraceReconError):
    pass
