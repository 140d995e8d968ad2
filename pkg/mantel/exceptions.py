"""Errors raised by the mantel library.

Everything derives from ``AdamantError`` so the management command can turn
any of them into a ``CommandError`` with a single ``except`` clause.
"""


class AdamantError(ValueError):
    """Base class for all library errors."""


class InsufficientObservationsError(AdamantError):
    pass


class NotCenteredError(AdamantError):
    pass


class RankZeroError(AdamantError):
    pass


class DimensionMismatchError(AdamantError):
    pass


class InvalidKernelError(AdamantError):
    pass


class DegenerateSimilarityError(AdamantError):
    pass


class InvalidPermutationError(AdamantError):
    pass


class EmptyMetricListError(AdamantError):
    pass


class BandUnresolvedError(AdamantError):
    pass


class ZeroPowerChannelError(AdamantError):
    pass


class InvalidConfigError(AdamantError):
    pass


class MatrixParseError(AdamantError):
    """Malformed CSV input, located by 1-based data row and column name."""

    def __init__(self, message, path=None, row=None, column=None):
        self.path = path
        self.row = row
        self.column = column
        location = []
        if path is not None:
            location.append(str(path))
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        prefix = ", ".join(location)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class SingleBinCoherenceWarning(UserWarning):
    """Coherence computed from a single frequency bin of a single trial is identically 1."""
