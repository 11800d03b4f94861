"""Exception hierarchy for stfl and the exception -> exit-code table."""

from __future__ import annotations

from stfl.constants import ExitCode


class StflError(Exception):
    """Base exception for stfl operations."""

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


class DimensionError(StflError):
    """Shape or extent mismatch; ``axis`` names the offending axis when known."""

    def __init__(self, message: str, axis: str | None = None) -> None:
        if axis is not None:
            message = f"{message} (axis {axis})"
        super().__init__(message)
        self.axis = axis


class DataError(StflError):
    """Invalid dataset content: manifests, labels, boxes, degenerate inputs."""

    def __init__(
        self,
        message: str,
        *,
        line: int | None = None,
        frame: int | None = None,
    ) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        if frame is not None:
            message = f"frame {frame}: {message}"
        super().__init__(message)
        self.line = line
        self.frame = frame


class FormatError(StflError):
    """Malformed binary or text container; ``offset`` is the byte offset."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} at byte offset {offset}"
        super().__init__(message)
        self.offset = offset


class StateMismatchError(FormatError):
    """Checkpoint tensors do not match the target network."""

    def __init__(self, message: str, name: str) -> None:
        super().__init__(message)
        self.name = name


class NumericError(StflError):
    """Non-finite values or an undefined numeric operation in ``op``."""

    def __init__(self, message: str, op: str | None = None) -> None:
        if op is not None:
            message = f"{op}: {message}"
        super().__init__(message)
        self.op = op


class ConfigurationError(StflError):
    """Invalid architecture or training configuration."""


class StateError(StflError):
    """Operation called without the state it needs (e.g. a forward context)."""


class UsageError(StflError):
    """Bad command line; ``usage`` holds the command's usage text."""

    def __init__(self, message: str, usage: str = "") -> None:
        super().__init__(message)
        self.usage = usage


# ---------------------------------------------------------------------------
# Exception -> exit code
# ---------------------------------------------------------------------------

_EXIT_CODES: dict[type[BaseException], ExitCode] = {
    UsageError: ExitCode.USAGE,
    ConfigurationError: ExitCode.USAGE,
    DataError: ExitCode.DATA,
    FormatError: ExitCode.DATA,
    DimensionError: ExitCode.DATA,
    StateError: ExitCode.DATA,
    OSError: ExitCode.DATA,
    NumericError: ExitCode.NUMERIC,
}


def exit_code_for(exc: BaseException) -> ExitCode:
    """Map an exception to the process exit code (nearest class in the MRO wins)."""
    for cls in type(exc).__mro__:
        code = _EXIT_CODES.get(cls)
        if code is not None:
            return code
    return ExitCode.DATA
