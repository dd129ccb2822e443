"""Diagnostics and the exception hierarchy."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    """Half-open character range into the source text."""

    start: int
    end: int


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    span: Span | None = None
    line: int = 0
    col: int = 0
    byte_start: int = 0
    byte_end: int = 0

    @classmethod
    def at(cls, src: str, span: Span | None, message: str, severity: str = "error") -> "Diagnostic":
        if span is None or src is None:
            return cls(severity, message, span)
        start = max(0, min(span.start, len(src)))
        end = max(start, min(span.end, len(src)))
        line = src.count("\n", 0, start) + 1
        col = start - (src.rfind("\n", 0, start) + 1) + 1
        b0 = len(src[:start].encode("utf-8"))
        b1 = b0 + len(src[start:end].encode("utf-8"))
        return cls(severity, message, Span(start, end), line, col, b0, b1)

    def render(self, filename: str = "<input>") -> str:
        if self.line:
            return f"{filename}:{self.line}:{self.col}: {self.severity}: {self.message}"
        return f"{filename}: {self.severity}: {self.message}"


class PolyeffError(Exception):
    pass


class ParseError(PolyeffError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))


class TypeCheckError(PolyeffError):
    """Surface type error naming the violated rule."""

    def __init__(self, rule: str, message: str, span: Span | None = None):
        self.rule = rule
        self.detail = message
        self.span = span
        super().__init__(f"{rule}: {message}")


class IRTypeError(PolyeffError):
    def __init__(self, rule: str, message: str):
        self.rule = rule
        super().__init__(f"{rule}: {message}")


class SubstitutionError(PolyeffError):
    pass


class StepCheckFailure(PolyeffError):
    def __init__(self, index: int, before, after, diagnostic: str):
        self.index = index
        self.before = before
        self.after = after
        self.diagnostic = diagnostic
        super().__init__(f"step {index}: {diagnostic}")
