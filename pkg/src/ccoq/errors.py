"""Exception types and the finding record shared by the loaders."""

from __future__ import annotations

from dataclasses import dataclass


class CcoqError(Exception):
    """Base class for every error raised by this package."""


class FormatError(CcoqError, ValueError):
    """A data file does not follow its documented format.

    ``location`` is a human-readable ``<source>:<line>`` string when known.
    """

    def __init__(self, message: str, location: str | None = None) -> None:
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class NotFoundError(CcoqError, KeyError):
    def __init__(self, message: str, suggestions: tuple[str, ...] = ()) -> None:
        self.suggestions = suggestions
        if suggestions:
            message = f"{message} (did you mean: {', '.join(suggestions)})"
        super().__init__(message)

    def __str__(self) -> str:
        return str(self.args[0])


class MixedCurrencyError(CcoqError, ValueError):
    pass


@dataclass(frozen=True)
class Finding:
    """One data-quality observation. Findings are data, not failures."""

    code: str
    message: str
    severity: str = "error"  # "error" | "warning"
    location: str | None = None
    row: int | None = None
    amount_minor: int | None = None

    def __str__(self) -> str:
        where = self.location or (f"row {self.row}" if self.row is not None else "")
        prefix = f"{where}: " if where else ""
        return f"{prefix}{self.severity} {self.code}: {self.message}"
