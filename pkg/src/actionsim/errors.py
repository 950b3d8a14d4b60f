"""Exception types shared across the pipeline."""


class ActionSimError(Exception):
    """Base class for all pipeline errors."""


class ManifestError(ActionSimError):
    """Corpus manifest is missing, malformed, or violates an invariant."""


class IngestError(ActionSimError):
    """Frame extraction or frame-sequence transformation failed."""


class OverlayError(IngestError):
    """Skeleton overlay could not be rendered (e.g. missing track entry)."""


class BackendError(ActionSimError):
    """A captioner/judge backend failed after bounded retries."""


class CaptionError(ActionSimError):
    """Clip description failed; carries per-clip detail when batched."""

    def __init__(self, message: str, clip_errors: list[tuple[int, str]] | None = None):
        super().__init__(message)
        self.clip_errors = clip_errors or []


class SampleExcluded(ActionSimError):
    """Sample does not satisfy the captioner input requirements."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class ScoreParseError(ActionSimError):
    """No usable similarity score could be extracted from a response."""


class JudgeError(ActionSimError):
    """Pair scoring failed; carries every raw response seen."""

    def __init__(self, message: str, raw_responses: list[str] | None = None):
        super().__init__(message)
        self.raw_responses = raw_responses or []


class MatrixError(ActionSimError):
    """Similarity-matrix assembly or persistence failed."""


class OrderMismatchError(MatrixError):
    """Matrix row/column order does not match the corpus order."""


class ClassifyError(ActionSimError):
    """Prototype scoring or prediction is impossible for this input."""


class ReportError(ActionSimError):
    """Heatmap or table rendering received unusable inputs."""


class ConfigError(ActionSimError):
    """Run configuration is invalid."""
