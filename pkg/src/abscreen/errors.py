"""Exception types shared across the package.

Every error raised by abscreen derives from :class:`AbscreenError` so callers
can catch pipeline failures without swallowing programming errors.
"""

from __future__ import annotations


class AbscreenError(Exception):
    """Base class for all abscreen errors."""


class ConfigError(AbscreenError):
    """Invalid run configuration or unusable input path."""


class RecordParseError(AbscreenError):
    """A line of a record file could not be parsed.

    Carries the file path and 1-based line number.
    """

    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        self.reason = reason
        super().__init__(f"{path}:{line}: {reason}")


class RecordValidationError(AbscreenError):
    """A parsed record violates a schema invariant.

    ``field`` names the offending field or invariant.
    """

    def __init__(self, reason: str, field: str, path: str | None = None,
                 line: int | None = None, index: int | None = None):
        self.field = field
        self.path = path
        self.line = line
        self.index = index
        loc = ""
        if path is not None and line is not None:
            loc = f"{path}:{line}: "
        if index is not None:
            loc += f"record {index}: "
        super().__init__(f"{loc}{reason}")


class JoinError(AbscreenError):
    """Studies reference reviews absent from the manifest."""

    def __init__(self, missing_review_ids: list[str]):
        self.missing_review_ids = missing_review_ids
        listed = ", ".join(missing_review_ids)
        super().__init__(f"unresolved review_id(s): {listed}")


class TokenizerError(AbscreenError):
    """Unusable vocabulary/merge files or untokenizable input."""


class BudgetError(AbscreenError):
    """A token budget is invalid or cannot be met by truncation."""


class TruncationFloorError(BudgetError):
    """A section is too short to truncate any further."""


class TemplateError(AbscreenError):
    """A prompt template slot is missing its value."""


class EndpointError(AbscreenError):
    """Transport-level failure talking to the inference endpoint."""

    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt(s))")


class ProtocolError(AbscreenError):
    """The endpoint answered with a non-success status or malformed body."""

    def __init__(self, message: str, status: int | None = None, body: str = ""):
        self.status = status
        self.body_excerpt = body[:200]
        detail = f" [status {status}]" if status is not None else ""
        excerpt = f": {self.body_excerpt}" if self.body_excerpt else ""
        super().__init__(f"{message}{detail}{excerpt}")


class AmbiguousResponseError(AbscreenError):
    """A completion mentions neither decision label."""


class EvaluationError(AbscreenError):
    """Predictions and gold labels cannot be aligned."""


class FitError(AbscreenError):
    """A model cannot be fitted on the given corpus (e.g. empty)."""


class DegenerateTrainingError(AbscreenError):
    """Training data contains a single class."""


class SamplingError(AbscreenError):
    """A source review is too small for without-replacement sampling."""


class CorrelationUndefinedError(AbscreenError):
    """Pearson correlation is undefined (constant input)."""
