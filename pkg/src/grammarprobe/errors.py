"""Exception taxonomy for the pipeline.

Every domain failure derives from :class:`GrammarProbeError` so the CLI can
map it to exit code 1 with a machine-readable tail line. Anything else
escaping a stage is a bug, not a domain error.
"""

from __future__ import annotations


class GrammarProbeError(Exception):
    """Base class for all domain errors."""

    def machine_tail(self) -> str:
        return f'{{"error": "{type(self).__name__}", "detail": {_json_str(str(self))}}}'


def _json_str(s: str) -> str:
    import json

    return json.dumps(s, ensure_ascii=False)


class PreconditionError(GrammarProbeError):
    """An operation was called in a state its contract forbids."""


# --- document ingestion ---

class MalformedInterchange(GrammarProbeError):
    """Interchange file violates the schema; message carries the field path."""

    def __init__(self, path: str, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = path


class EmptyDocument(GrammarProbeError):
    pass


class NoGrammarSections(GrammarProbeError):
    pass


# --- LLM access ---

class LlmUnavailable(GrammarProbeError):
    pass


class LlmTransientError(GrammarProbeError):
    """Retryable provider failure; consumed by the retry loop."""


class AuthError(GrammarProbeError):
    pass


class ContextTooLong(GrammarProbeError):
    pass


class UnparseableReply(GrammarProbeError):
    pass


class ReplayMiss(GrammarProbeError):
    def __init__(self, request_hash: str):
        super().__init__(f"no recorded transcript for request {request_hash}")
        self.request_hash = request_hash


class CacheCorrupt(GrammarProbeError):
    pass


class ScriptExhausted(GrammarProbeError):
    pass


# --- dataset / forging ---

class MissingVerdict(GrammarProbeError):
    pass


class DegenerateContrast(GrammarProbeError):
    pass


# --- task harness ---

class InsufficientPool(GrammarProbeError):
    pass


class MissingTemplate(GrammarProbeError):
    pass


class MixedKinds(GrammarProbeError):
    pass


# --- metrics ---

class EmptyReference(GrammarProbeError):
    pass


class VocabMissing(GrammarProbeError):
    pass


class AlignmentMismatch(GrammarProbeError):
    pass


# --- stats / reporting ---

class DegenerateInput(GrammarProbeError):
    pass


class ColumnMismatch(GrammarProbeError):
    pass


class IdMismatch(GrammarProbeError):
    pass


# --- fixtures ---

class GoldenMismatch(GrammarProbeError):
    pass
