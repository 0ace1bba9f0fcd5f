"""Exception hierarchy shared by all bitext modules.

Exit-code mapping used by the CLI:
  ValidationError -> 2, InputOutputError -> 3, ProviderError -> 4.
"""

from __future__ import annotations


class BitextError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(BitextError):
    """Bad usage, bad configuration, or structurally invalid data."""


class ParseError(ValidationError):
    """A serialized artifact could not be parsed.

    Carries the offending line number when known.
    """

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = ""
        if path is not None:
            loc += f"{path}: "
        if line is not None:
            loc += f"line {line}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class StructuralError(ValidationError):
    """Mismatched dimensions, lengths, or counts between paired inputs."""


class InputOutputError(BitextError):
    """File could not be read or written; message names the path."""


class ProviderError(BitextError):
    """An embedding provider failed or returned a malformed response."""


class MissingEmbeddingError(ProviderError):
    """A file-backed provider has no vector for the requested text."""

    def __init__(self, text_hash: str):
        super().__init__(f"no embedding stored for text hash {text_hash}")
        self.text_hash = text_hash
