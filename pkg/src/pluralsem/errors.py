"""Exception types raised across the package.

Every operation that can fail on bad input raises one of these rather than a
bare ValueError, so callers (and the command line front end) can tell user
errors from bugs.
"""

from __future__ import annotations


class PluralsemError(Exception):
    """Base class for all package-specific errors."""


class IoFailure(PluralsemError):
    """A file could not be read or written."""


# ---------------------------------------------------------------------------
# corpus loading

class MalformedRow(PluralsemError):
    """A manifest row violates the schema or the lexeme structure rules."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateId(PluralsemError):
    """A type or token id occurs more than once."""


class DanglingTypeReference(PluralsemError):
    """A token row names a type_id that does not exist."""


class DimensionMismatch(PluralsemError):
    """A vector has the wrong number of components."""


class UnparsableFloat(PluralsemError):
    """A numeric field is not a finite float."""


# ---------------------------------------------------------------------------
# conceptualizers and linear maps

class EmptyTrainingSet(PluralsemError):
    """No training pairs or rows were supplied."""


class ShapeMismatch(PluralsemError):
    """Two matrices disagree on a shared dimension."""


class NonFiniteInput(PluralsemError):
    """An input matrix contains NaN or infinity."""


# ---------------------------------------------------------------------------
# audio features

class EmptySignal(PluralsemError):
    """An audio signal has no samples."""


class ChunkTooShort(PluralsemError):
    """A chunk is shorter than one spectrogram window."""


class AudioReadFailure(PluralsemError):
    """An audio file is missing, unreadable, or not a supported format."""


class TooManyChunks(PluralsemError):
    """A token produced more chunks than the configured maximum."""


class NoUsableTokens(PluralsemError):
    """Every token in a batch failed feature extraction."""


# ---------------------------------------------------------------------------
# evaluation

class UnknownTarget(PluralsemError):
    """A target type_id is missing from the gold index."""


class LengthMismatch(PluralsemError):
    """Two parallel sequences have different lengths."""


class InvalidCounts(PluralsemError):
    """Counts passed to a statistical test are inconsistent."""


# ---------------------------------------------------------------------------
# cross validation and studies

class TypeTooRare(PluralsemError):
    """A type has fewer tokens than the number of folds."""

    def __init__(self, type_ids, k: int):
        self.type_ids = tuple(sorted(type_ids))
        self.k = k
        shown = ", ".join(self.type_ids[:8])
        if len(self.type_ids) > 8:
            shown += ", ..."
        super().__init__(
            f"{len(self.type_ids)} type(s) have fewer than {k} tokens: {shown}"
        )


class TooFewTypes(PluralsemError):
    """A distance study needs at least three comparable items."""


class InvalidSpec(PluralsemError):
    """A synthetic corpus description is out of range."""
