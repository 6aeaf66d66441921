"""Exception hierarchy shared by all modules.

The CLI maps each class onto a stable exit code (see ``ioreduce.cli``).
"""


class IOReduceError(Exception):
    """Base class for every error raised on purpose by this package."""


class DomainError(IOReduceError, ValueError):
    """Inputs lie outside the domain where the I/O model is defined."""


class ConfigError(IOReduceError, ValueError):
    """Malformed profile, scenario, stage graph or run configuration."""


class FormatError(IOReduceError, ValueError):
    """A byte stream or container does not follow its documented layout."""


class DecodeError(FormatError):
    """A codec stream is corrupt.  ``offset`` points at the offending input byte."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at input offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedFormatError(FormatError):
    """Container references a codec, preconditioner or version we do not know."""


class IntegrityError(IOReduceError):
    """Block checksum mismatch after decoding."""

    def __init__(self, message: str, block_index: int | None = None):
        super().__init__(message)
        self.block_index = block_index


class CodecLookupError(IOReduceError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
