"""Error types shared across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    """Location of a token or node in the input text (1-based)."""

    line: int
    column: int
    length: int = 0

    def __post_init__(self):
        if self.line < 1 or self.column < 1 or self.length < 0:
            raise ValueError(f"invalid span {self.line}:{self.column}+{self.length}")

    def __str__(self):
        return f"{self.line}:{self.column}"


class AcornsError(Exception):
    """Base for all tool errors."""


class ParseError(AcornsError):
    """Malformed input text."""

    def __init__(self, span: SourceSpan, message: str):
        super().__init__(f"{span}: {message}")
        self.span = span
        self.message = message


class UnsupportedConstruct(AcornsError):
    """Input is valid C but outside the supported subset."""

    def __init__(self, span: SourceSpan | None, construct: str):
        where = f"{span}: " if span else ""
        super().__init__(f"{where}unsupported construct: {construct}")
        self.span = span
        self.construct = construct


class MissingFunction(AcornsError):
    def __init__(self, name: str):
        super().__init__(f"function '{name}' not found in input")
        self.name = name


class MissingEnergyVar(AcornsError):
    def __init__(self, name: str):
        super().__init__(f"energy variable '{name}' is never declared or assigned")
        self.name = name


class NotConstant(AcornsError):
    """Expression is not compile-time evaluable."""

    def __init__(self, span: SourceSpan | None, message: str):
        where = f"{span}: " if span else ""
        super().__init__(f"{where}{message}")
        self.span = span
        self.message = message


class BoundExplosion(AcornsError):
    """Unrolling would exceed the assignment cap."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"unrolled assignment count {count} exceeds cap {cap}")
        self.count = count
        self.cap = cap


class ExpressionExplosion(AcornsError):
    """Substituted expression would exceed the node cap."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"expression node count {count} exceeds cap {cap}")
        self.count = count
        self.cap = cap


class FormatError(AcornsError):
    """Corrupt or incompatible intermediate file."""


class UnboundSlot(AcornsError):
    def __init__(self, name: str):
        super().__init__(f"no value bound for slot '{name}'")
        self.name = name
