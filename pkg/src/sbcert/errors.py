"""Exception types shared across the package."""


class InputError(ValueError):
    """Rejected input: dimension mismatch, out-of-range parameter, bad config."""


class DatasetParseError(ValueError):
    """Malformed dataset file; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CompositionError(ValueError):
    """Small-gain or relaxed composition preconditions violated."""
