"""Exception types shared across the package.

All data/input problems raise GlasstrackError subclasses so the CLI can map
them to its exit-code contract (2 = bad input, 1 = partial failure).
Programming errors (bad arguments to library functions) raise ValueError.
"""


class GlasstrackError(Exception):
    pass


class BackgroundsDepletedError(GlasstrackError):
    """Raised when a plan needs more backgrounds than the corpus can supply."""


class MeshParseError(GlasstrackError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ResultFormatError(GlasstrackError):
    """Malformed tracker result or ground-truth file (carries file:line)."""


class CoverageError(GlasstrackError):
    """Evaluation inputs do not cover the required (tracker, sequence) pairs."""
