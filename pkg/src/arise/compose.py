"""Survey drafting: section prompts scoped to their own evidence.

Each outline node becomes a section prompt carrying only that node's
knowledge-base summaries. Writers cite with bracketed numeric keys; an
editor pass may reshape prose but never the citation set. Both guards are
mechanical: one reprompt, then repair (strip foreign keys, append missing
ones) so the evidence-lock invariants hold no matter what a model does.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .agents import WRITER_TEMPERATURE
from .errors import MissingSection
from .gateway import AgentCall, Gateway
from .kb import CkmStore
from .outline import Outline, OutlineNode, ref_number, sorted_keys

logger = logging.getLogger(__name__)

_BRACKET_CITE = re.compile(r"\[(\d+(?:\s*,\s*\d+)*)\]")
_LATEX_CITE = re.compile(r"\\cite\{([^}]*)\}")


def extract_cite_keys(text: str) -> set[str]:
    """Citation keys in a body, both ``[N]`` bracket and ``\\cite{refN}`` forms."""
    keys: set[str] = set()
    for group in _BRACKET_CITE.findall(text):
        for number in group.split(","):
            keys.add(f"ref{number.strip()}")
    for group in _LATEX_CITE.findall(text):
        for key in group.split(","):
            key = key.strip()
            if re.fullmatch(r"ref\d+", key):
                keys.add(key)
    return keys


def strip_keys(text: str, keys: set[str]) -> str:
    """Remove citation tokens for the given keys from a body."""
    numbers = {str(ref_number(k)) for k in keys}

    def fix_bracket(match: re.Match) -> str:
        kept = [n.strip() for n in match.group(1).split(",") if n.strip() not in numbers]
        return f"[{', '.join(kept)}]" if kept else ""

    def fix_cite(match: re.Match) -> str:
        kept = [k.strip() for k in match.group(1).split(",") if k.strip() not in keys]
        return f"\\cite{{{','.join(kept)}}}" if kept else ""

    text = _BRACKET_CITE.sub(fix_bracket, text)
    text = _LATEX_CITE.sub(fix_cite, text)
    return re.sub(r"  +", " ", text)


@dataclass
class Section:
    section_id: str
    heading: str
    level: int
    body: str
    cite_keys: set[str] = field(default_factory=set)
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "section_id": self.section_id,
            "heading": self.heading,
            "level": self.level,
            "body": self.body,
            "cite_keys": sorted_keys(self.cite_keys),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Section":
        return cls(
            section_id=data["section_id"],
            heading=data["heading"],
            level=data["level"],
            body=data["body"],
            cite_keys=set(data["cite_keys"]),
            flags=list(data.get("flags", [])),
        )


@dataclass
class Draft:
    sections: list[Section] = field(default_factory=list)
    title: str = ""
    abstract: str = ""

    def cite(self) -> set[str]:
        keys: set[str] = set()
        for section in self.sections:
            keys |= extract_cite_keys(section.body)
        return keys

    def section_by_id(self, section_id: str) -> Section:
        for section in self.sections:
            if section.section_id == section_id:
                return section
        raise KeyError(section_id)

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "abstract": self.abstract,
            "sections": [s.to_dict() for s in self.sections],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Draft":
        return cls(
            sections=[Section.from_dict(s) for s in data["sections"]],
            title=data.get("title", ""),
            abstract=data.get("abstract", ""),
        )


def outline_sections(outline: Outline) -> list[tuple[str, OutlineNode]]:
    """Assign dotted section ids ("2", "2.1", ...) in outline preorder."""
    result: list[tuple[str, OutlineNode]] = []

    def walk(nodes: list[OutlineNode], prefix: str) -> None:
        for i, node in enumerate(nodes, start=1):
            sid = f"{prefix}{i}" if not prefix else f"{prefix}.{i}"
            result.append((sid, node))
            walk(node.children, sid)

    walk(outline.nodes, "")
    return result


def _render_evidence(evidence: dict[str, str]) -> str:
    lines = []
    for key in sorted_keys(set(evidence)):
        lines.append(f"[{ref_number(key)}] ({key}): {evidence[key]}")
    return "\n".join(lines) if lines else "(none - structural section)"


def draft_section(
    node: OutlineNode,
    evidence: dict[str, str],
    gateway: Gateway,
    skeleton: str = "",
) -> tuple[str, list[str]]:
    """Draft one section body citing exactly the evidence keys.

    Returns (body, flags). A body that misses evidence keys or cites
    foreign ones gets one reprompt; a persistent offender is repaired
    mechanically and the repair flagged.
    """
    expected = set(evidence)
    example = str(ref_number(sorted_keys(expected)[0])) if expected else "1"
    call = AgentCall(
        template_id="section_writer",
        variables={
            "heading": node.title,
            "level": node.level,
            "skeleton": skeleton or "(single section)",
            "evidence": _render_evidence(evidence),
            "example_key": example,
        },
        expected_schema="section_body",
        temperature=WRITER_TEMPERATURE,
    )
    flags: list[str] = []
    body = gateway.complete(call)["body"]
    cited = extract_cite_keys(body)
    if cited - expected or expected - cited:
        body = gateway.complete(call)["body"]
        cited = extract_cite_keys(body)

    foreign = cited - expected
    if foreign:
        logger.warning("section %r cited foreign keys %s; stripping", node.title, sorted_keys(foreign))
        body = strip_keys(body, foreign)
        flags.append("stripped_foreign_keys")

    missing = expected - extract_cite_keys(body)
    if missing:
        logger.warning("section %r failed to cite %s; appending", node.title, sorted_keys(missing))
        markers = "".join(f"[{ref_number(k)}]" for k in sorted_keys(missing))
        body = body.rstrip() + f"\n\nRelated work also informs this section {markers}."
        flags.append("appended_missing_keys")

    assert extract_cite_keys(body) == expected
    return body, flags


def edit_section(body: str, gateway: Gateway, prev_tail: str = "") -> tuple[str, bool]:
    """Editor pass; reverts to the input when the citation set changed.

    Returns (body, reverted).
    """
    if not body.strip():
        raise ValueError("cannot edit an empty section body")
    call = AgentCall(
        template_id="section_editor",
        variables={"body": body, "prev_tail": prev_tail or "(document start)"},
        expected_schema="section_body",
        temperature=WRITER_TEMPERATURE,
    )
    edited = gateway.complete(call)["body"]
    if extract_cite_keys(edited) != extract_cite_keys(body):
        logger.warning("editor changed the citation set; reverting to writer output")
        return body, True
    return edited, False


def _draft_digest(sections: list[Section], limit: int = 400) -> str:
    parts = []
    for section in sections:
        snippet = section.body[:limit].rsplit(" ", 1)[0] if section.body else ""
        parts.append(f"{'#' * section.level} {section.heading}\n{snippet}")
    return "\n\n".join(parts)


def assemble(
    outline: Outline,
    bodies: dict[str, tuple[str, list[str]]],
    gateway: Gateway,
    ckm: CkmStore,
) -> Draft:
    """Merge section bodies into a unified draft in outline preorder.

    Title and abstract are generated from the assembled content. Raises
    MissingSection if any node with citation keys lacks a body.
    """
    numbered = outline_sections(outline)
    missing = [sid for sid, node in numbered if node.cite_keys and sid not in bodies]
    if missing:
        raise MissingSection(missing)

    ckm_keys = ckm.keys()
    sections: list[Section] = []
    for sid, node in numbered:
        body, flags = bodies.get(sid, ("", []))
        sections.append(
            Section(
                section_id=sid,
                heading=node.title,
                level=node.level,
                body=body,
                cite_keys=node.cite_keys & ckm_keys,
                flags=list(flags),
            )
        )

    digest = _draft_digest(sections)
    title = gateway.complete(
        AgentCall(
            template_id="title_generator",
            variables={"draft_digest": digest},
            expected_schema="title",
            temperature=WRITER_TEMPERATURE,
        )
    )["title"].strip()
    abstract = gateway.complete(
        AgentCall(
            template_id="abstract_generator",
            variables={"draft_digest": digest},
            expected_schema="abstract",
            temperature=WRITER_TEMPERATURE,
        )
    )["abstract"].strip()

    draft = Draft(sections=sections, title=title, abstract=abstract)
    expected = {k for _sid, node in numbered for k in node.cite_keys & ckm_keys}
    actual = draft.cite()
    if actual != expected:
        raise AssertionError(
            f"draft citation coverage broken: missing {sorted_keys(expected - actual)}, "
            f"extra {sorted_keys(actual - expected)}"
        )
    return draft


def render_plaintext(draft: Draft) -> str:
    """Flat text rendering used for pagination and review chunking."""
    parts = []
    if draft.title:
        parts.append(draft.title + "\n")
    if draft.abstract:
        parts.append("Abstract: " + draft.abstract + "\n")
    for section in draft.sections:
        parts.append(f"{'#' * section.level} {section.heading}\n{section.body}\n")
    return "\n".join(parts)
