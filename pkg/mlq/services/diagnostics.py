# mlq/services/diagnostics.py
"""
Spans, diagnostics and the error raised by the front end.

Every stage of the compiler reports problems as `Diagnostic` values. Stages that
cannot produce a result (parse, resolve, compile) raise `CompileError` carrying
all diagnostics collected so far; validation passes simply return them.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    offset: int
    length: int

    @property
    def end(self) -> int:
        return self.offset + self.length

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


NO_SPAN = Span(1, 1, 0, 0)


def join_spans(first: Span, last: Span) -> Span:
    """Smallest span covering both `first` and `last`."""
    if last.end < first.offset:
        first, last = last, first
    return Span(first.line, first.column, first.offset, max(last.end - first.offset, 0))


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"
    NOTE = "note"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    severity: Severity
    message: str
    span: Span = NO_SPAN
    path: Optional[str] = None

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def render(self, default_path: str = "<input>") -> str:
        path = self.path or default_path
        return f"{path}:{self.span.line}:{self.span.column}: {self.severity.value}: [{self.code}] {self.message}"

    def with_path(self, path: Optional[str]) -> "Diagnostic":
        if path is None or self.path is not None:
            return self
        return Diagnostic(self.code, self.severity, self.message, self.span, path)


def error(code: str, message: str, span: Span = NO_SPAN) -> Diagnostic:
    return Diagnostic(code, Severity.ERROR, message, span)


def warning(code: str, message: str, span: Span = NO_SPAN) -> Diagnostic:
    return Diagnostic(code, Severity.WARNING, message, span)


def note(code: str, message: str, span: Span = NO_SPAN) -> Diagnostic:
    return Diagnostic(code, Severity.NOTE, message, span)


def sort_diagnostics(diagnostics: Iterable[Diagnostic]) -> List[Diagnostic]:
    """Stable ordering by file, position, then code."""
    return sorted(diagnostics, key=lambda d: (d.path or "", d.span.offset, d.span.length, d.code, d.message))


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)


class CompileError(Exception):
    """Raised when a front-end stage cannot produce its result."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0].message if self.diagnostics else "unknown error"
        super().__init__(f"{len(self.diagnostics)} diagnostic(s), first: {first}")

    @property
    def codes(self) -> List[str]:
        return [d.code for d in self.diagnostics]
