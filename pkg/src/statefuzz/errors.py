"""Exception types shared across the package."""

from __future__ import annotations


class StateFuzzError(Exception):
    """Base class for all errors raised by this package."""


class CorpusFormatError(StateFuzzError):
    """A corpus or dictionary file could not be parsed.

    Carries the source name and the byte offset of the problem so a bad
    file can be fixed without guesswork.
    """

    def __init__(self, source: str, offset: int, reason: str):
        self.source = source
        self.offset = offset
        self.reason = reason
        super().__init__(f"{source}: offset {offset}: {reason}")


class EmptyCorpusError(StateFuzzError):
    """The corpus directory contained no loadable sequence files."""


class StateMismatchError(StateFuzzError):
    """A target response prefix cannot be reproduced from a sequence."""


class ConfigurationError(StateFuzzError):
    """A campaign or CLI configuration value is out of range or unknown."""
