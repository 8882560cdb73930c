"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class AriseError(Exception):
    """Base class for all engine errors."""


class ConfigError(AriseError):
    """Invalid run configuration or CLI flags."""


# --- pipeline-core -----------------------------------------------------------

class InvalidTransition(AriseError):
    """Phase output kind does not match the current phase."""


class PersistenceFailure(AriseError):
    """Artifact or manifest could not be written."""


class CorruptManifest(AriseError):
    """Run directory has no valid manifest."""


class MissingArtifact(AriseError):
    """A completed phase's artifact is absent or its hash does not match."""

    def __init__(self, phase: str, detail: str = ""):
        self.phase = phase
        super().__init__(f"missing or corrupt artifact for phase {phase}" + (f": {detail}" if detail else ""))


# --- llm-gateway -------------------------------------------------------------

class TemplateError(AriseError):
    """Unknown template or unbound template variable."""


class SchemaViolation(AriseError):
    """Provider output failed schema validation after all attempts."""

    def __init__(self, message: str, raw_text: str = "", attempts: int = 0):
        self.raw_text = raw_text
        self.attempts = attempts
        super().__init__(message)


class ProviderError(AriseError):
    """Transport-level provider failure (HTTP error, quota, timeout)."""

    def __init__(self, message: str, retryable: bool = True, retry_after: float | None = None):
        self.retryable = retryable
        self.retry_after = retry_after
        super().__init__(message)


class ScriptExhausted(AriseError):
    """A scripted provider received a call matching no remaining entry."""


# --- scholarly-clients -------------------------------------------------------

class NetworkError(AriseError):
    """Retryable transport failure against a bibliographic endpoint."""


class RateLimited(NetworkError):
    """Endpoint rate limit hit; carries the suggested retry delay."""

    def __init__(self, message: str, retry_after: float = 1.0):
        self.retry_after = retry_after
        super().__init__(message)


class PaywalledError(AriseError):
    """Document retrieval blocked by a paywall."""


class NotFoundError(AriseError):
    """Document or record does not exist at the queried location."""


# --- topic-scoping -----------------------------------------------------------

class EmptyApprovalOnFinalize(AriseError):
    """finalize issued with zero approved subtopics."""


class IndexOutOfRange(AriseError):
    """Decision referenced a subtopic index that does not exist."""


# --- citation-prep -----------------------------------------------------------

class AllPairsFailed(AriseError):
    """Every (subtopic, source) retrieval pair failed."""


# --- outline-cpos ------------------------------------------------------------

class ValidationFailedAfterBackfill(AriseError):
    """Merged citation set still wrong after backfill (backfill bug)."""


class FinalCompletenessFailed(AriseError):
    """Final outline does not cover the knowledge-base key set."""

    def __init__(self, missing: set[str]):
        self.missing = set(missing)
        super().__init__(f"final outline missing keys: {sorted(self.missing)}")


# --- composer ----------------------------------------------------------------

class MissingSection(AriseError):
    """Outline nodes with no drafted body."""

    def __init__(self, node_ids: list[str]):
        self.node_ids = list(node_ids)
        super().__init__(f"no body for outline nodes: {self.node_ids}")


# --- citefmt -----------------------------------------------------------------

class MissingBibKey(AriseError):
    """Draft cites a key with no bibliography entry."""


class TemplateUnknown(AriseError):
    """Venue template id not present in the registry."""


class BibParseError(AriseError):
    """BibTeX source could not be parsed."""


# --- refine-loop -------------------------------------------------------------

class EmptyDocument(AriseError):
    """Chunking requested on a document with no pages."""


class ReviewParseFailure(AriseError):
    """Reviewer output unusable after repair; the cell is marked missing."""


class EmptyInput(AriseError):
    """Aggregation requested over zero reviewer totals."""


# --- evalkit -----------------------------------------------------------------

class RubricInvalid(AriseError):
    """Rubric definition violates the 7x20 structure or anchor coverage."""


class NoReferencesSection(AriseError):
    """Document has no recognizable references section."""


class EmptyAudit(AriseError):
    """Traceability audit invoked with zero extracted references."""
