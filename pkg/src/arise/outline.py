"""Citation-preserving outline synthesis.

Mini-batches of knowledge-base summaries become partial outlines; partial
outlines are merged pairwise in rounds until one remains. Merging is where
models drop things, so every merge is audited against the set invariant

    cite(merged) == cite(left) | cite(right)

with dropped keys backfilled into the best-matching node and stray keys
stripped. The final outline must cover the knowledge-base key set exactly.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterator

from .agents import WRITER_TEMPERATURE
from .errors import FinalCompletenessFailed, ValidationFailedAfterBackfill
from .gateway import AgentCall, Gateway
from .kb import CkmEntry, CkmStore

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 8
FALLBACK_NODE_TITLE = "Further Topics"

_REF_KEY = re.compile(r"^ref[0-9]+$")


def ref_number(key: str) -> int:
    return int(key[3:])


def sorted_keys(keys: set[str]) -> list[str]:
    return sorted(keys, key=ref_number)


@dataclass
class OutlineNode:
    title: str
    level: int
    cite_keys: set[str] = field(default_factory=set)
    children: list["OutlineNode"] = field(default_factory=list)

    def walk(self) -> Iterator["OutlineNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "level": self.level,
            "cite_keys": sorted_keys(self.cite_keys),
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OutlineNode":
        return cls(
            title=data["title"],
            level=data["level"],
            cite_keys=set(data["cite_keys"]),
            children=[cls.from_dict(c) for c in data.get("children", [])],
        )


@dataclass
class Outline:
    nodes: list[OutlineNode] = field(default_factory=list)

    def walk(self) -> Iterator[OutlineNode]:
        for node in self.nodes:
            yield from node.walk()

    def cite(self) -> set[str]:
        keys: set[str] = set()
        for node in self.walk():
            keys |= node.cite_keys
        return keys

    def validate(self) -> None:
        def check(node: OutlineNode, expected_level: int) -> None:
            if not node.title.strip():
                raise ValueError("outline node with empty title")
            if node.level != expected_level:
                raise ValueError(
                    f"node {node.title!r} at level {node.level}, expected {expected_level}"
                )
            for key in node.cite_keys:
                if not _REF_KEY.match(key):
                    raise ValueError(f"invalid citation key {key!r} in {node.title!r}")
            for child in node.children:
                check(child, expected_level + 1)

        for node in self.nodes:
            check(node, 1)

    def to_dict(self) -> dict:
        return {"nodes": [n.to_dict() for n in self.nodes]}

    @classmethod
    def from_dict(cls, data: dict) -> "Outline":
        return cls(nodes=[OutlineNode.from_dict(n) for n in data["nodes"]])

    def render_text(self) -> str:
        lines = []
        for node in self.walk():
            keys = ",".join(sorted_keys(node.cite_keys))
            lines.append(f"{'#' * node.level} {node.title}" + (f" [{keys}]" if keys else ""))
        return "\n".join(lines)


@dataclass
class MergeAudit:
    left_keys: set[str]
    right_keys: set[str]
    merged_keys: set[str]
    missing_after_merge: set[str]
    backfilled: set[str]
    stripped: set[str] = field(default_factory=set)
    coherent: bool | None = None
    issues: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "left_keys": sorted_keys(self.left_keys),
            "right_keys": sorted_keys(self.right_keys),
            "merged_keys": sorted_keys(self.merged_keys),
            "missing_after_merge": sorted_keys(self.missing_after_merge),
            "backfilled": sorted_keys(self.backfilled),
            "stripped": sorted_keys(self.stripped),
            "coherent": self.coherent,
            "issues": list(self.issues),
        }


def _coerce_key(raw) -> str | None:
    """Accept refN, bare integers, or integer strings; reject the rest."""
    if isinstance(raw, int):
        return f"ref{raw}" if raw >= 1 else None
    text = str(raw).strip()
    if _REF_KEY.match(text):
        return text
    if text.isdigit() and int(text) >= 1:
        return f"ref{text}"
    return None


def _parse_agent_outline(payload: dict) -> Outline:
    def build(raw: dict, level: int) -> OutlineNode:
        keys = set()
        for raw_key in raw.get("cite_keys", []):
            key = _coerce_key(raw_key)
            if key is None:
                logger.warning("dropping malformed citation key %r", raw_key)
            else:
                keys.add(key)
        title = str(raw.get("title", "")).strip() or "Untitled Section"
        return OutlineNode(
            title=title,
            level=level,
            cite_keys=keys,
            children=[build(c, level + 1) for c in raw.get("children", [])],
        )

    outline = Outline(nodes=[build(section, 1) for section in payload["sections"]])
    outline.validate()
    return outline


def _title_overlap(title: str, summary: str) -> int:
    title_tokens = {t.lower() for t in re.findall(r"[a-zA-Z0-9]+", title)}
    summary_tokens = {t.lower() for t in re.findall(r"[a-zA-Z0-9]+", summary)}
    return len(title_tokens & summary_tokens)


def _backfill(outline: Outline, missing: set[str], summaries: dict[str, str]) -> None:
    """Re-insert dropped keys at the node whose title best matches their summary.

    Ties resolve to the earliest node in document order; keys with no
    textual affinity go to a shared fallback node appended at the end.
    """
    orphans: list[str] = []
    for key in sorted_keys(missing):
        summary = summaries.get(key, "")
        best_node: OutlineNode | None = None
        best_overlap = 0
        for node in outline.walk():
            overlap = _title_overlap(node.title, summary)
            if overlap > best_overlap:
                best_overlap = overlap
                best_node = node
        if best_node is None:
            orphans.append(key)
        else:
            best_node.cite_keys.add(key)
    if orphans:
        fallback = next(
            (n for n in outline.nodes if n.title == FALLBACK_NODE_TITLE), None
        )
        if fallback is None:
            fallback = OutlineNode(title=FALLBACK_NODE_TITLE, level=1)
            outline.nodes.append(fallback)
        fallback.cite_keys.update(orphans)


def _strip_foreign(outline: Outline, allowed: set[str]) -> set[str]:
    stripped: set[str] = set()
    for node in outline.walk():
        foreign = node.cite_keys - allowed
        if foreign:
            stripped |= foreign
            node.cite_keys -= foreign
    return stripped


def partial_outline(batch: list[CkmEntry], gateway: Gateway) -> Outline:
    """Generate a partial outline covering every key in the batch."""
    if not batch:
        raise ValueError("batch must be non-empty")
    batch_keys = {entry.ref_id for entry in batch}
    summaries = {entry.ref_id: entry.summary for entry in batch}
    rendered = "\n".join(f"{entry.ref_id}: {entry.summary}" for entry in batch)
    call = AgentCall(
        template_id="outline_writer",
        variables={"batch": rendered},
        expected_schema="outline",
        temperature=WRITER_TEMPERATURE,
    )
    outline = _parse_agent_outline(gateway.complete(call))
    stripped = _strip_foreign(outline, batch_keys)
    if stripped:
        logger.warning("partial outline cited keys outside its batch: %s", sorted_keys(stripped))
    missing = batch_keys - outline.cite()
    if missing:
        logger.info("partial outline dropped %s; backfilling", sorted_keys(missing))
        _backfill(outline, missing, summaries)
    assert outline.cite() == batch_keys
    return outline


def merge(
    a: Outline,
    b: Outline,
    gateway: Gateway,
    summaries: dict[str, str] | None = None,
) -> tuple[Outline, MergeAudit]:
    """Merge two outlines; the result's citation set is exactly the union."""
    left_keys, right_keys = a.cite(), b.cite()
    union = left_keys | right_keys

    if not a.nodes or not b.nodes:
        merged = Outline.from_dict(a.to_dict() if a.nodes else b.to_dict())
        audit = MergeAudit(left_keys, right_keys, set(merged.cite()), set(), set())
        return merged, audit

    call = AgentCall(
        template_id="outline_merger",
        variables={
            "left": json.dumps(a.to_dict(), sort_keys=True),
            "right": json.dumps(b.to_dict(), sort_keys=True),
        },
        expected_schema="outline",
        temperature=WRITER_TEMPERATURE,
    )
    merged = _parse_agent_outline(gateway.complete(call))
    stripped = _strip_foreign(merged, union)
    merged_keys = merged.cite()
    missing = union - merged_keys
    if missing:
        _backfill(merged, missing, summaries or {})
    if merged.cite() != union:
        raise ValidationFailedAfterBackfill(
            f"merge invariant broken even after backfill: missing {sorted_keys(union - merged.cite())}"
        )
    audit = MergeAudit(
        left_keys=left_keys,
        right_keys=right_keys,
        merged_keys=merged_keys,
        missing_after_merge=missing,
        backfilled=missing,
        stripped=stripped,
    )
    return merged, audit


def _validate_coherence(outline: Outline, gateway: Gateway, audit: MergeAudit) -> None:
    """Advisory coherence check; the set invariant is enforced elsewhere."""
    call = AgentCall(
        template_id="outline_validator",
        variables={"outline": outline.render_text()},
        expected_schema="outline_validation",
    )
    verdict = gateway.complete(call)
    audit.coherent = verdict["coherent"]
    audit.issues = list(verdict["issues"])
    if not verdict["coherent"]:
        logger.info("validator flagged merged outline: %s", verdict["issues"])


def synthesize(
    ckm: CkmStore,
    gateway: Gateway,
    batch_size: int = DEFAULT_BATCH_SIZE,
    check_coherence: bool = True,
    audit_sink: list[MergeAudit] | None = None,
) -> Outline:
    """Build the global outline: batch, outline, merge pairwise, verify.

    Raises FinalCompletenessFailed if the surviving outline does not cover
    the knowledge-base key set exactly (error-list keys are outside the
    store and therefore outside this check).
    """
    if len(ckm) == 0:
        raise ValueError("knowledge base is empty")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")

    entries = ckm.entries()
    summaries = {e.ref_id: e.summary for e in entries}
    batches = [entries[i : i + batch_size] for i in range(0, len(entries), batch_size)]
    outlines = [partial_outline(batch, gateway) for batch in batches]

    while len(outlines) > 1:
        next_round: list[Outline] = []
        for i in range(0, len(outlines) - 1, 2):
            merged, audit = merge(outlines[i], outlines[i + 1], gateway, summaries)
            if check_coherence:
                _validate_coherence(merged, gateway, audit)
            if audit_sink is not None:
                audit_sink.append(audit)
            next_round.append(merged)
        if len(outlines) % 2 == 1:
            next_round.append(outlines[-1])
        outlines = next_round

    final = outlines[0]
    expected = ckm.keys()
    actual = final.cite()
    if actual != expected:
        raise FinalCompletenessFailed(expected - actual)
    return final
