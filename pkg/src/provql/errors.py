"""Error types shared across the pipeline stages."""

from __future__ import annotations


class ProvqlError(Exception):
    """Base error; carries an optional source span."""

    def __init__(self, message: str, span=None):
        super().__init__(message)
        self.message = message
        self.span = span

    def render(self, filename: str = "<input>", source: str | None = None) -> str:
        loc = f"{filename}:{self.span}" if self.span else filename
        out = f"{loc}: error: {self.message}"
        if source is not None and self.span is not None:
            lines = source.splitlines()
            if 1 <= self.span.line <= len(lines):
                line = lines[self.span.line - 1]
                out += "\n  " + line + "\n  " + " " * (self.span.col - 1) + "^"
        return out


class ParseError(ProvqlError):
    def __init__(self, message: str, span=None, expected=()):
        super().__init__(message, span)
        self.expected = tuple(expected)


class TypeCheckError(ProvqlError):
    pass


class QuerySafetyError(TypeCheckError):
    pass


class EvalError(ProvqlError):
    pass


class StuckTermError(EvalError):
    """An expression the stepper cannot decompose; signals an interpreter bug."""


class NormalizeError(ProvqlError):
    pass


class BackendError(ProvqlError):
    pass
