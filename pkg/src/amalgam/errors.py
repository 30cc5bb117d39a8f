"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class VocabularyError(ToolkitError):
    """Malformed vocabulary declaration."""


class StructureError(ToolkitError):
    """Structure data violates its vocabulary (arity, unknown element, partition)."""


class VocabularyMismatch(ToolkitError):
    """Two values were combined whose vocabularies do not agree."""


class ParseError(ToolkitError):
    """Text input rejected; carries a position when one is known."""

    def __init__(self, message: str, pos: int | None = None, line: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line})"
        elif pos is not None:
            loc = f" (at {pos})"
        super().__init__(message + loc)
        self.pos = pos
        self.line = line


class BudgetExceeded(ToolkitError):
    """A configured resource cap (candidate count, evaluation size) was hit."""


class AmalgamationError(ToolkitError):
    """An amalgamation strategy could not produce a class member."""
