"""
Error types shared by the bioext modules.

Argument precondition failures use the built-in ValueError; everything
raised here signals bad input data, bad configuration or a failed run.
"""

from typing import Optional


class BioExtError(Exception):
    """Base class for all toolkit errors."""


class ParseError(BioExtError):
    """Malformed input file; line_no is 1-based when known."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class OffsetError(BioExtError):
    """Character offsets that do not fit the document text."""


class EmbeddingFormatError(BioExtError):
    """Embedding file with inconsistent dimensions or counts."""


class SpanOverlapError(BioExtError):
    """Overlapping spans handed to a flat tag encoder."""

    def __init__(self, first, second):
        self.conflict = (first, second)
        super().__init__(f"overlapping spans {first} and {second}")


class TrainingError(BioExtError):
    """Training could not proceed (divergence, degenerate data)."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class ConfigError(BioExtError):
    """Invalid pipeline configuration; field is the dotted key."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class MissingArtifactError(BioExtError):
    """A command needs an artifact that an earlier command produces."""

    def __init__(self, path, hint: str = ""):
        self.path = path
        message = f"missing artifact {path}"
        if hint:
            message += f" ({hint})"
        super().__init__(message)
