"""Interactive topic expansion and domain scoping.

An expansion agent proposes subtopics, a human approves/edits/extends them
through a small decision protocol (shared by CLI prompts and the HTTP API),
and a scoping agent maps the approved set to source venues. Sources filter
the field only; no prestige weighting is stored.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Any

from .agents import WRITER_TEMPERATURE
from .errors import EmptyApprovalOnFinalize, IndexOutOfRange
from .gateway import AgentCall, Gateway

logger = logging.getLogger(__name__)

EXPANSION_MIN, EXPANSION_MAX = 5, 15


class SourceKind(enum.Enum):
    PublisherPortal = "publisher_portal"
    SearchIndex = "search_index"
    PreprintRepo = "preprint_repo"


@dataclass(frozen=True)
class Source:
    kind: SourceKind
    name: str


DEFAULT_SOURCES = (
    Source(SourceKind.SearchIndex, "scholar-graph"),
    Source(SourceKind.PreprintRepo, "preprint-archive"),
)


@dataclass(frozen=True)
class Decision:
    """One user action in the approval protocol."""

    action: str  # approve | remove | add | edit | finalize
    index: int | None = None
    text: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "Decision":
        action = data.get("action", "")
        if action not in {"approve", "remove", "add", "edit", "finalize"}:
            raise ValueError(f"unknown decision action {action!r}")
        return cls(action=action, index=data.get("index"), text=data.get("text"))

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"action": self.action}
        if self.index is not None:
            out["index"] = self.index
        if self.text is not None:
            out["text"] = self.text
        return out


@dataclass
class TopicSet:
    seed: str
    proposed: list[str] = field(default_factory=list)
    approved: list[str] = field(default_factory=list)
    revision_log: list[dict] = field(default_factory=list)
    finalized: bool = False

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "proposed": list(self.proposed),
            "approved": list(self.approved),
            "revision_log": [dict(e) for e in self.revision_log],
            "finalized": self.finalized,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TopicSet":
        return cls(
            seed=data["seed"],
            proposed=list(data["proposed"]),
            approved=list(data["approved"]),
            revision_log=[dict(e) for e in data["revision_log"]],
            finalized=data["finalized"],
        )


@dataclass
class SourcePlan:
    entries: list[tuple[str, list[Source]]]

    def sources_for(self, subtopic: str) -> list[Source]:
        for topic, sources in self.entries:
            if topic == subtopic:
                return sources
        return []

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    "subtopic": topic,
                    "sources": [{"kind": s.kind.value, "name": s.name} for s in sources],
                }
                for topic, sources in self.entries
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SourcePlan":
        return cls(
            entries=[
                (
                    e["subtopic"],
                    [Source(SourceKind(s["kind"]), s["name"]) for s in e["sources"]],
                )
                for e in data["entries"]
            ]
        )


def _dedup_case_insensitive(items: list[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for item in items:
        text = item.strip()
        key = text.lower()
        if text and key not in seen:
            seen.add(key)
            out.append(text)
    return out


def expand_topics(seed: str, gateway: Gateway) -> list[str]:
    """Propose semantically related subtopics for the survey seed."""
    if not seed.strip():
        raise ValueError("topic seed must be non-empty")
    call = AgentCall(
        template_id="topic_expansion",
        variables={"seed": seed},
        expected_schema="topic_list",
        temperature=WRITER_TEMPERATURE,
    )
    subtopics = _dedup_case_insensitive(gateway.complete(call)["subtopics"])
    if len(subtopics) < EXPANSION_MIN:
        more = gateway.complete(call)["subtopics"]
        subtopics = _dedup_case_insensitive(subtopics + more)
    if len(subtopics) < EXPANSION_MIN:
        raise ValueError(
            f"expansion produced only {len(subtopics)} distinct subtopics (need >= {EXPANSION_MIN})"
        )
    if len(subtopics) > EXPANSION_MAX:
        logger.info("truncating expansion from %d to %d subtopics", len(subtopics), EXPANSION_MAX)
        subtopics = subtopics[:EXPANSION_MAX]
    return subtopics


def _log_entry(action: str, subtopic: str, now: str | None, **extra) -> dict:
    entry = {
        "action": action,
        "subtopic": subtopic,
        "timestamp": now if now is not None else time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    entry.update(extra)
    return entry


def apply_user_decision(topics: TopicSet, decision: Decision, now: str | None = None) -> TopicSet:
    """Apply one approval-protocol action; returns a new TopicSet.

    The revision log is append-only and replayable: replaying it over the
    original proposed list reconstructs the approved set exactly.
    """
    if topics.finalized:
        raise ValueError("topic set is finalized; no further decisions accepted")

    proposed = list(topics.proposed)
    approved = list(topics.approved)
    log = [dict(e) for e in topics.revision_log]

    def need_index() -> int:
        if decision.index is None or not 0 <= decision.index < len(proposed):
            raise IndexOutOfRange(f"index {decision.index} outside proposed list of {len(proposed)}")
        return decision.index

    if decision.action == "approve":
        text = proposed[need_index()]
        if text not in approved:
            approved.append(text)
        log.append(_log_entry("approve", text, now))
    elif decision.action == "remove":
        text = proposed.pop(need_index())
        if text in approved:
            approved.remove(text)
        log.append(_log_entry("remove", text, now))
    elif decision.action == "add":
        if not decision.text or not decision.text.strip():
            raise ValueError("add requires non-empty text")
        text = decision.text.strip()
        if text not in proposed:
            proposed.append(text)
        if text not in approved:
            approved.append(text)
        log.append(_log_entry("add", text, now))
    elif decision.action == "edit":
        idx = need_index()
        if not decision.text or not decision.text.strip():
            raise ValueError("edit requires non-empty text")
        old = proposed[idx]
        new = decision.text.strip()
        proposed[idx] = new
        approved = [new if t == old else t for t in approved]
        log.append(_log_entry("edit", new, now, prior=old))
    elif decision.action == "finalize":
        if not approved:
            raise EmptyApprovalOnFinalize("cannot finalize with zero approved subtopics")
        log.append(_log_entry("finalize", "", now))
        return replace(topics, proposed=proposed, approved=approved, revision_log=log, finalized=True)
    else:
        raise ValueError(f"unknown decision action {decision.action!r}")

    return replace(topics, proposed=proposed, approved=approved, revision_log=log)


def replay_revision_log(proposed: list[str], log: list[dict]) -> list[str]:
    """Rebuild the approved list by replaying log actions over ``proposed``."""
    working = list(proposed)
    approved: list[str] = []
    for entry in log:
        action, text = entry["action"], entry["subtopic"]
        if action == "approve":
            if text not in approved:
                approved.append(text)
        elif action == "remove":
            if text in working:
                working.remove(text)
            if text in approved:
                approved.remove(text)
        elif action == "add":
            if text not in working:
                working.append(text)
            if text not in approved:
                approved.append(text)
        elif action == "edit":
            old = entry.get("prior", "")
            working = [text if t == old else t for t in working]
            approved = [text if t == old else t for t in approved]
    return approved


def scope_domains(topics: TopicSet, gateway: Gateway) -> SourcePlan:
    """Map each approved subtopic to topically appropriate source venues.

    Source kinds outside the allowlist are discarded rather than trusted;
    a subtopic left without sources falls back to the default search-index
    plus preprint-repo pair so the pipeline always progresses.
    """
    if not topics.finalized:
        raise ValueError("scope_domains requires a finalized topic set")
    call = AgentCall(
        template_id="domain_scoping",
        variables={"subtopics": "\n".join(f"- {t}" for t in topics.approved)},
        expected_schema="source_plan",
    )
    parsed = gateway.complete(call)
    by_topic: dict[str, list[Source]] = {}
    for entry in parsed["entries"]:
        sources = []
        for s in entry["sources"]:
            try:
                sources.append(Source(SourceKind(s["kind"]), s["name"]))
            except ValueError:
                logger.warning("dropping source with unknown kind %r", s.get("kind"))
        by_topic[entry["subtopic"]] = sources

    entries: list[tuple[str, list[Source]]] = []
    for subtopic in topics.approved:
        sources = by_topic.get(subtopic, [])
        if not sources:
            logger.info("no usable sources for %r; applying defaults", subtopic)
            sources = list(DEFAULT_SOURCES)
        entries.append((subtopic, sources))
    return SourcePlan(entries=entries)
