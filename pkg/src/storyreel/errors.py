"""Exception hierarchy. Every error maps to a CLI exit code."""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BACKEND = 3
EXIT_CONTRACT = 4
EXIT_RENDER_TOOL = 5


class StoryReelError(Exception):
    """Base class for all pipeline errors."""

    exit_code = EXIT_CONTRACT


class InvalidRequestError(StoryReelError):
    """Request parameters violate their invariants (empty subject, bad range)."""

    exit_code = EXIT_USAGE


class ContractViolationError(StoryReelError):
    """An operation was called outside its documented precondition."""

    exit_code = EXIT_CONTRACT


class BackendError(StoryReelError):
    """A generative backend failed. Carries the request hash for diagnosis."""

    exit_code = EXIT_BACKEND

    def __init__(self, message: str, request_hash: str | None = None):
        super().__init__(message)
        self.request_hash = request_hash


class BackendTimeoutError(BackendError):
    """Backend did not answer within the configured timeout on any attempt."""


class BackendAuthError(BackendError):
    """Backend rejected our credentials. Not retried."""


class MalformedResponseError(BackendError):
    """Backend answered but the payload could not be parsed."""


class TransientBackendError(BackendError):
    """Retryable failure (connection reset, 5xx, subprocess crash)."""


class EmptyStoryError(BackendError):
    """Text backend returned an empty completion for the story prompt."""


class CorruptAssetError(StoryReelError):
    """Bytes on disk do not match their recorded hash or cannot be decoded."""


class InvalidSelectionError(StoryReelError):
    """Candidate selection index out of range or no candidates exist."""


class DependencyError(StoryReelError):
    """A stage was run while an earlier stage is still pending."""

    def __init__(self, stage: str, missing: str):
        super().__init__(f"stage '{stage}' requires stage '{missing}' to be done first")
        self.stage = stage
        self.missing = missing


class RenderToolError(StoryReelError):
    """The media assembly tool failed; carries its diagnostics."""

    exit_code = EXIT_RENDER_TOOL

    def __init__(self, message: str, diagnostics: str = ""):
        super().__init__(message)
        self.diagnostics = diagnostics


class StageError(StoryReelError):
    """Wraps any failure with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def exit_code(self) -> int:  # type: ignore[override]
        if isinstance(self.cause, StoryReelError):
            return self.cause.exit_code
        return EXIT_CONTRACT
