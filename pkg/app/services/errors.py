from __future__ import annotations


class LabError(RuntimeError):
    """Base class for failures raised by the analysis services."""


class PreconditionError(LabError):
    """Raised when an operation's documented precondition does not hold for its inputs.

    The scenario runner records these in the report and exits with the verdict-failure code
    instead of treating them as crashes.
    """
