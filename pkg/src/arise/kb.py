"""Citation-keyed memory: per-citation retrieval, summarization, error list.

Content is fetched directly by stored URL with a metadata-search fallback;
whatever text survives (full, abstract, or introduction) is summarized into
a contribution-focused entry keyed by refN. Citations that defeat every
attempt land on the error list, which gets one automatic reprocess pass at
the end of the build. CKM keys and error keys always partition the curated
index.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field

from .agents import WRITER_TEMPERATURE
from .citations import Citation
from .errors import NetworkError, NotFoundError, PaywalledError, SchemaViolation
from .gateway import AgentCall, Gateway
from .resolve import ContentStatus, QueryKind, Resolver, ResolverQuery

logger = logging.getLogger(__name__)

SUMMARY_MIN_WORDS = 80
SUMMARY_MAX_WORDS = 250

_REF_TOKEN = re.compile(r"\bref\d+\b")


@dataclass
class CkmEntry:
    ref_id: str
    summary: str
    source_kind: ContentStatus
    summary_tokens_est: int
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ref_id": self.ref_id,
            "summary": self.summary,
            "source_kind": self.source_kind.value,
            "summary_tokens_est": self.summary_tokens_est,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CkmEntry":
        return cls(
            ref_id=data["ref_id"],
            summary=data["summary"],
            source_kind=ContentStatus(data["source_kind"]),
            summary_tokens_est=data["summary_tokens_est"],
            flags=list(data.get("flags", [])),
        )


@dataclass
class ErrorList:
    entries: list[dict] = field(default_factory=list)  # {ref_id, attempts: [...]}

    def keys(self) -> set[str]:
        return {e["ref_id"] for e in self.entries}

    def add(self, ref_id: str, attempts: list[dict]) -> None:
        if not attempts:
            raise ValueError("error list entries must record at least one attempt")
        self.entries.append({"ref_id": ref_id, "attempts": list(attempts)})

    def to_dict(self) -> dict:
        return {"entries": [dict(e) for e in self.entries]}

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorList":
        return cls(entries=[dict(e) for e in data["entries"]])


class CkmStore:
    """Key-addressed evidence memory; immutable once the build finishes."""

    def __init__(self):
        self._entries: dict[str, CkmEntry] = {}
        self._frozen = False

    def insert(self, entry: CkmEntry) -> None:
        if self._frozen:
            raise RuntimeError("store is frozen")
        if entry.ref_id in self._entries:
            raise ValueError(f"duplicate CKM key {entry.ref_id}")
        if not entry.summary.strip():
            raise ValueError(f"empty summary for {entry.ref_id}")
        self._entries[entry.ref_id] = entry

    def freeze(self) -> None:
        self._frozen = True

    def keys(self) -> set[str]:
        return set(self._entries)

    def ordered_keys(self) -> list[str]:
        return sorted(self._entries, key=lambda k: int(k[3:]))

    def entry(self, ref_id: str) -> CkmEntry:
        return self._entries[ref_id]

    def entries(self) -> list[CkmEntry]:
        return [self._entries[k] for k in self.ordered_keys()]

    def __len__(self) -> int:
        return len(self._entries)

    def query(self, keys: set[str]) -> tuple[dict[str, str], set[str]]:
        """Key-scoped evidence lookup.

        Returns ({ref_id: summary} for the requested keys that exist, in
        ascending N order) plus the set of requested keys that are missing.
        """
        present = [k for k in keys if k in self._entries]
        present.sort(key=lambda k: int(k[3:]))
        found = {k: self._entries[k].summary for k in present}
        missing = set(keys) - set(found)
        return found, missing

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries()]}

    @classmethod
    def from_dict(cls, data: dict) -> "CkmStore":
        store = cls()
        for raw in data["entries"]:
            store.insert(CkmEntry.from_dict(raw))
        store.freeze()
        return store


def _word_count(text: str) -> int:
    return len(text.split())


def _truncate_words(text: str, limit: int) -> str:
    words = text.split()
    return " ".join(words[:limit])


def _foreign_keys(text: str, own: str) -> set[str]:
    return {m for m in _REF_TOKEN.findall(text)} - {own}


def summarize_source(text: str, citation: Citation, gateway: Gateway) -> tuple[str, list[str]]:
    """Contribution-focused summary of one source, 80-250 words.

    A violating reply (length band or a foreign refN mention) earns one
    reprompt; a second violation is repaired mechanically - truncation for
    length, token scrub for contamination - and flagged.
    """
    if not text.strip():
        raise ValueError("cannot summarize empty text")
    call = AgentCall(
        template_id="source_summarizer",
        variables={
            "ref_id": citation.ref_id,
            "title": citation.title,
            "authors": ", ".join(citation.authors),
            "text": text,
        },
        expected_schema="summary",
        temperature=WRITER_TEMPERATURE,
    )
    flags: list[str] = []
    summary = gateway.complete(call)["summary"].strip()
    ok_length = SUMMARY_MIN_WORDS <= _word_count(summary) <= SUMMARY_MAX_WORDS
    if not ok_length or _foreign_keys(summary, citation.ref_id):
        summary = gateway.complete(call)["summary"].strip()
    if _word_count(summary) > SUMMARY_MAX_WORDS:
        summary = _truncate_words(summary, SUMMARY_MAX_WORDS)
        flags.append("truncated")
    if _word_count(summary) < SUMMARY_MIN_WORDS:
        flags.append("short")
    foreign = _foreign_keys(summary, citation.ref_id)
    if foreign:
        for key in foreign:
            summary = summary.replace(key, "")
        summary = re.sub(r"  +", " ", summary)
        flags.append("scrubbed_foreign_keys")
        logger.warning("summary for %s referenced foreign keys %s; scrubbed", citation.ref_id, sorted(foreign))
    return summary, flags


def _retrieve_content(citation: Citation, resolver: Resolver, attempts: list[dict]):
    """Direct URL fetch, then author+title fallback search. None on failure."""
    if citation.url:
        try:
            return resolver.fetch_document(citation.url)
        except (PaywalledError, NotFoundError, NetworkError) as exc:
            attempts.append({"method": "direct_url", "error": type(exc).__name__, "detail": str(exc)})
    else:
        attempts.append({"method": "direct_url", "error": "NoUrl", "detail": "citation has no stored URL"})

    query = ResolverQuery(
        QueryKind.ByTitleAuthor,
        {"title": citation.title, "authors": ", ".join(citation.authors)},
    )
    try:
        hits = resolver.resolve(query)
    except (NetworkError, NotFoundError) as exc:
        attempts.append({"method": "fallback_search", "error": type(exc).__name__, "detail": str(exc)})
        return None
    for hit in hits:
        locator = hit.url or hit.doi
        if not locator or locator == citation.url:
            continue
        try:
            return resolver.fetch_document(locator)
        except (PaywalledError, NotFoundError, NetworkError) as exc:
            attempts.append(
                {"method": "fallback_fetch", "error": type(exc).__name__, "detail": f"{locator}: {exc}"}
            )
    if not hits:
        attempts.append({"method": "fallback_search", "error": "NoHits", "detail": "no metadata match"})
    return None


def build_kb(
    citations: list[Citation],
    resolver: Resolver,
    gateway: Gateway,
    reprocess: bool = True,
) -> tuple[CkmStore, ErrorList]:
    """Build the citation-keyed memory and the error list for one run.

    Post: CKM keys and error-list keys are disjoint and together cover
    every input ref_id. Identical fetched text (same normalized bytes) is
    summarized once and the summary body shared across keys.
    """
    store = CkmStore()
    errors = ErrorList()
    failed: list[tuple[Citation, list[dict]]] = []
    summary_cache: dict[str, tuple[str, list[str]]] = {}

    def process(citation: Citation, attempts: list[dict]) -> bool:
        fetched = _retrieve_content(citation, resolver, attempts)
        if fetched is None:
            return False
        digest = hashlib.sha256(" ".join(fetched.text.split()).encode("utf-8")).hexdigest()
        if digest in summary_cache:
            summary, flags = summary_cache[digest]
            flags = list(flags) + ["shared_summary_body"]
        else:
            try:
                summary, flags = summarize_source(fetched.text, citation, gateway)
            except SchemaViolation as exc:
                attempts.append({"method": "summarize", "error": "SchemaViolation", "detail": str(exc)})
                return False
            summary_cache[digest] = (summary, flags)
        store.insert(
            CkmEntry(
                ref_id=citation.ref_id,
                summary=summary,
                source_kind=fetched.status,
                summary_tokens_est=_word_count(summary),
                flags=flags,
            )
        )
        return True

    for citation in citations:
        attempts: list[dict] = []
        if not process(citation, attempts):
            failed.append((citation, attempts))

    if reprocess and failed:
        still_failed = []
        for citation, attempts in failed:
            if not process(citation, attempts):
                still_failed.append((citation, attempts))
        failed = still_failed

    for citation, attempts in failed:
        errors.add(citation.ref_id, attempts)

    store.freeze()
    assert store.keys().isdisjoint(errors.keys())
    assert store.keys() | errors.keys() == {c.ref_id for c in citations}
    return store, errors
