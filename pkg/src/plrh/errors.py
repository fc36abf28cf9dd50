"""Exception hierarchy shared across the package.

Everything raised on purpose derives from PlrhError so callers can catch
one type at the boundary (the CLI maps these to exit code 2).
"""

from __future__ import annotations


class PlrhError(RuntimeError):
    """Base class for all errors raised by this package."""


class DatasetError(PlrhError):
    """Malformed sample or feature files, or a broken sample/feature join."""


class ConfigError(PlrhError):
    """Invalid run configuration or unparseable config file."""


class RetrievalError(PlrhError):
    """Bad query vector, empty pool, or a dimension mismatch during selection."""


class PromptError(PlrhError):
    """A prompt is structurally invalid for its stage."""


class LLMClientError(PlrhError):
    """Base class for completion backend failures."""


class FixtureMissError(LLMClientError):
    """A scripted mock backend has no completion for the requested prompt."""

    def __init__(self, prompt_hash: str) -> None:
        super().__init__(f"no scripted completion for prompt hash {prompt_hash}")
        self.prompt_hash = prompt_hash


class ContextLengthError(LLMClientError):
    """The prompt exceeds the backend's context window. Never retried."""

    def __init__(self, prompt_hash: str, detail: str = "") -> None:
        msg = f"prompt {prompt_hash} exceeds the backend context window"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.prompt_hash = prompt_hash


class RetryBudgetExceededError(LLMClientError):
    """All retry attempts for one request failed."""


class StoreError(PlrhError):
    """Record store misuse: key/record mismatch or an unusable store directory."""


class StoreLockedError(StoreError):
    """Another live process holds the store's writer lock."""


class StageDependencyError(PlrhError):
    """A pipeline stage needs a record an earlier stage never produced."""


class EvaluationError(PlrhError):
    """Scoring was asked to do something undefined (no annotations, unknown id)."""
