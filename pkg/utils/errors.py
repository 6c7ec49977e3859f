"""
Exception hierarchy shared by the engines, readers and the command line.
Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class QisError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class DomainError(QisError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class ScheduleError(DomainError):
    """An exposure schedule could not be parsed or is inconsistent."""


class FormatError(QisError):
    """
    A file or byte stream does not follow its format.

    Args:
        message: str - Human readable description
        offset: int - Byte offset of the offending data, when known
        frame: int - Frame index (stack containers)
        pixel: int - Row-major pixel index inside the frame
        path: str - File the data came from
    """

    exit_code = 3

    def __init__(self, message: str, offset: Optional[int] = None,
                 frame: Optional[int] = None, pixel: Optional[int] = None,
                 path: Optional[str] = None):
        self.offset = offset
        self.frame = frame
        self.pixel = pixel
        self.path = path

        context = []
        if path is not None:
            context.append(f"file {path}")
        if offset is not None:
            context.append(f"byte offset {offset}")
        if frame is not None:
            context.append(f"frame {frame}")
        if pixel is not None:
            context.append(f"pixel {pixel}")

        super().__init__(f"{message} ({', '.join(context)})" if context else message)


class NumericalError(QisError):
    """A numerical procedure failed to produce a usable answer."""

    exit_code = 4


class FitError(NumericalError):
    """A histogram fit was attempted on degenerate data."""
