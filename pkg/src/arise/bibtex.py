"""BibTeX entries keyed by refN: completion, parsing, canonical printing.

The printer and parser agree on a canonical form (titles double-braced to
preserve case, authors as "Last, First and ..."), so emitted bibliography
files re-parse losslessly. Metadata completion queries the resolver and
only trusts hits at or above the verifiable match threshold.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .citations import Citation
from .errors import BibParseError
from .resolve import (
    VERIFIABLE_SCORE,
    QueryKind,
    Resolver,
    ResolverHit,
    ResolverQuery,
)

logger = logging.getLogger(__name__)

KEY_PATTERN = re.compile(r"^ref[0-9]+$")

MANDATORY_FIELDS = {
    "article": ("author", "title", "journal", "year"),
    "inproceedings": ("author", "title", "booktitle", "year"),
    "book": ("author", "title", "publisher", "year"),
    "techreport": ("author", "title", "institution", "year"),
    "misc": ("title",),
}

VENUE_FIELD = {
    "article": "journal",
    "inproceedings": "booktitle",
    "book": "publisher",
    "techreport": "institution",
    "misc": "howpublished",
}

_CONFERENCE_HINTS = ("proceedings", "conference", "workshop", "symposium", "conf.", "meeting")
_PREPRINT_HINTS = ("arxiv", "preprint", "biorxiv", "ssrn")

FIELD_ORDER = (
    "author",
    "title",
    "journal",
    "booktitle",
    "publisher",
    "institution",
    "howpublished",
    "year",
    "doi",
    "url",
    "note",
)


@dataclass
class BibEntry:
    key: str
    entry_type: str
    fields: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if not KEY_PATTERN.match(self.key):
            raise ValueError(f"bib key {self.key!r} must match ref[0-9]+")
        if self.entry_type not in MANDATORY_FIELDS:
            raise ValueError(f"unsupported entry type {self.entry_type!r}")
        for name in MANDATORY_FIELDS[self.entry_type]:
            if not self.fields.get(name, "").strip():
                raise ValueError(f"{self.key}: mandatory field {name!r} missing for @{self.entry_type}")
        for name, value in self.fields.items():
            if value.count("{") != value.count("}"):
                raise ValueError(f"{self.key}: unbalanced braces in field {name!r}")


def normalize_author(name: str) -> str:
    """One name to "Last, First" form; already-comma'd names pass through."""
    name = re.sub(r"\s+", " ", name).strip()
    if not name or "," in name:
        return name
    parts = name.split(" ")
    if len(parts) == 1:
        return name
    return f"{parts[-1]}, {' '.join(parts[:-1])}"


def format_authors(authors: list[str]) -> str:
    return " and ".join(normalize_author(a) for a in authors if a.strip())


def split_authors(author_field: str) -> list[str]:
    return [a.strip() for a in re.split(r"\s+and\s+", author_field) if a.strip()]


def classify_entry_type(venue: str) -> str:
    lowered = venue.lower()
    if not lowered.strip():
        return "misc"
    if any(hint in lowered for hint in _PREPRINT_HINTS):
        return "misc"
    if any(hint in lowered for hint in _CONFERENCE_HINTS):
        return "inproceedings"
    return "article"


def _high_score_hits(citation: Citation, resolver: Resolver) -> list[ResolverHit]:
    hits: list[ResolverHit] = []
    if citation.doi:
        hits.extend(resolver.resolve(ResolverQuery(QueryKind.ByDoi, {"doi": citation.doi})))
    if not hits:
        hits.extend(
            resolver.resolve(
                ResolverQuery(
                    QueryKind.ByTitleAuthor,
                    {"title": citation.title, "authors": ", ".join(citation.authors)},
                )
            )
        )
    return [h for h in hits if h.match_score >= VERIFIABLE_SCORE]


def complete_citation(citation: Citation, resolver: Resolver) -> tuple[BibEntry, list[str]]:
    """Resolve missing metadata and emit a standardized entry.

    Only hits with match_score >= 0.90 may fill fields. Two high-score hits
    disagreeing on year by more than one flag a resolution conflict and the
    original metadata is kept. Entries that still lack mandatory fields
    fall back to @misc with the URL.
    """
    flags: list[str] = []
    hits = _high_score_hits(citation, resolver)

    years = sorted({h.year for h in hits if h.year is not None})
    conflicted = bool(years) and years[-1] - years[0] > 1
    if conflicted:
        flags.append("resolution_conflict")
        logger.warning("%s: conflicting resolver years %s; keeping original metadata", citation.ref_id, years)
        hits = []

    best = hits[0] if hits else None
    title = citation.title
    authors = list(citation.authors)
    venue = citation.venue
    year = citation.year
    doi = citation.doi
    url = citation.url
    if best is not None:
        title = title or best.title
        authors = authors or list(best.authors)
        venue = venue or best.venue
        year = year if year is not None else best.year
        doi = doi or best.doi
        url = url or best.url

    entry_type = classify_entry_type(venue)
    fields: dict[str, str] = {"title": title}
    if authors:
        fields["author"] = format_authors(authors)
    if venue:
        fields[VENUE_FIELD[entry_type]] = venue
    if year is not None:
        fields["year"] = str(year)
    if doi:
        fields["doi"] = doi
    if url:
        fields["url"] = url

    entry = BibEntry(key=citation.ref_id, entry_type=entry_type, fields=fields)
    try:
        entry.validate()
    except ValueError:
        # Mandatory fields unfillable: degrade to @misc with the locator.
        flags.append("fallback_misc")
        fields = {"title": title}
        if authors:
            fields["author"] = format_authors(authors)
        if year is not None:
            fields["year"] = str(year)
        if url:
            fields["url"] = url
        elif doi:
            fields["url"] = f"https://doi.org/{doi}"
        if venue:
            fields["howpublished"] = venue
        entry = BibEntry(key=citation.ref_id, entry_type="misc", fields=fields)
        entry.validate()
    return entry, flags


# --- canonical printing ---------------------------------------------------------


def format_entry(entry: BibEntry) -> str:
    entry.validate()
    lines = [f"@{entry.entry_type}{{{entry.key},"]
    ordered = [name for name in FIELD_ORDER if name in entry.fields]
    ordered += [name for name in sorted(entry.fields) if name not in FIELD_ORDER]
    for name in ordered:
        value = entry.fields[name]
        rendered = f"{{{{{value}}}}}" if name == "title" else f"{{{value}}}"
        lines.append(f"  {name} = {rendered},")
    lines.append("}")
    return "\n".join(lines)


def format_bibliography(entries: list[BibEntry]) -> str:
    return "\n\n".join(format_entry(e) for e in entries) + "\n"


# --- parsing --------------------------------------------------------------------


def _strip_redundant_braces(value: str) -> str:
    # Strip outer brace pairs that span the whole value; "{{X}}" -> "X",
    # while partial protection like "{CNN} models" is preserved.
    while len(value) >= 2 and value[0] == "{" and value[-1] == "}":
        depth = 0
        spans_whole = True
        for i, ch in enumerate(value):
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0 and i != len(value) - 1:
                    spans_whole = False
                    break
        if not spans_whole:
            break
        value = value[1:-1]
    return value


def parse_bibliography(text: str) -> list[BibEntry]:
    """Parse a .bib source into entries; raises BibParseError on bad syntax."""
    entries: list[BibEntry] = []
    pos = 0
    length = len(text)
    while True:
        at = text.find("@", pos)
        if at < 0:
            break
        brace = text.find("{", at)
        if brace < 0:
            raise BibParseError(f"entry at offset {at} has no opening brace")
        entry_type = text[at + 1 : brace].strip().lower()
        if entry_type in ("comment", "preamble", "string"):
            pos = _match_brace(text, brace) + 1
            continue
        end = _match_brace(text, brace)
        body = text[brace + 1 : end]
        entries.append(_parse_entry_body(entry_type, body))
        pos = end + 1
        if pos >= length:
            break
    return entries


def _match_brace(text: str, open_index: int) -> int:
    depth = 0
    for i in range(open_index, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return i
    raise BibParseError(f"unbalanced braces starting at offset {open_index}")


def _parse_entry_body(entry_type: str, body: str) -> BibEntry:
    comma = body.find(",")
    if comma < 0:
        raise BibParseError(f"@{entry_type} entry has no key")
    key = body[:comma].strip()
    fields: dict[str, str] = {}
    i = comma + 1
    while i < len(body):
        eq = body.find("=", i)
        if eq < 0:
            break
        name = body[i:eq].strip().strip(",").strip().lower()
        if not name:
            raise BibParseError(f"{key}: field with empty name")
        j = eq + 1
        while j < len(body) and body[j] in " \t\n\r":
            j += 1
        if j >= len(body):
            raise BibParseError(f"{key}: field {name!r} has no value")
        if body[j] == "{":
            end = _match_brace(body, j)
            raw = body[j + 1 : end]
            i = end + 1
        elif body[j] == '"':
            end = body.find('"', j + 1)
            if end < 0:
                raise BibParseError(f"{key}: unterminated quoted value in {name!r}")
            raw = body[j + 1 : end]
            i = end + 1
        else:
            end = body.find(",", j)
            if end < 0:
                end = len(body)
            raw = body[j:end].strip()
            i = end
        fields[name] = _strip_redundant_braces(raw.strip())
        while i < len(body) and body[i] in " \t\n\r,":
            i += 1
    return BibEntry(key=key, entry_type=entry_type, fields=fields)
