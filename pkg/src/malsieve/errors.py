"""Exception types raised across the pipeline.

Every malformed input or contract violation maps to one of these; nothing
in the package intentionally lets a raw struct/index error escape.
"""


class MalsieveError(Exception):
    """Base class for all errors raised by this package."""


# --- APK container / binary format parsing ---

class NotAnArchive(MalsieveError):
    """Input bytes are not a ZIP container (no end-of-central-directory)."""


class TruncatedArchive(MalsieveError):
    """Archive structures or entry payloads run past the available bytes,
    or a payload does not match the sizes declared in the entry header."""


class UnsupportedCompression(MalsieveError):
    """Entry uses a compression method other than stored or deflate."""


class DuplicateEntry(MalsieveError):
    """Two archive entries share the same path."""


class MissingManifest(MalsieveError):
    """Archive has no AndroidManifest.xml entry."""


class MalformedAxml(MalsieveError):
    """Binary XML payload violates the chunk layout."""


class MalformedDex(MalsieveError):
    """DEX payload has a bad magic, out-of-bounds offset or bad string data."""


# --- vectorizer / file formats ---

class EmptyCorpus(MalsieveError):
    """Vocabulary construction got zero records."""


class FormatError(MalsieveError):
    """A text artifact (records / dataset / vocabulary / model file) is
    malformed; carries a line number when one is known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionMismatch(MalsieveError):
    """Vector, model or file dimensions disagree."""


# --- learners / ensemble ---

class SingleClassData(MalsieveError):
    """Training data contains only one class."""


class NonFiniteLoss(MalsieveError):
    """Training diverged (loss became NaN or infinite); the learning rate
    is almost certainly too high."""


class AllZeroWeights(MalsieveError):
    """A weight vector selecting no learners was used for voting."""


class EmptyDataset(MalsieveError):
    """Operation requires at least one sample."""


# --- evaluation / configuration ---

class TooSmall(MalsieveError):
    """Dataset too small to split."""


class LengthMismatch(MalsieveError):
    """Parallel sequences have different lengths."""


class InvalidConfig(MalsieveError):
    """Configuration value out of range or key unknown; names the key."""
