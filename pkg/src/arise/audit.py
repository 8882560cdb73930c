"""Citation traceability audit: extraction, matching, eCTR.

References are pulled from the manuscript (exactly, from the bibliography
file, or heuristically from extracted page text) and each one is matched
against the resolver. A reference verifies on an exact DOI hit or a
normalized-title match at or above the shared 0.90 threshold; eCTR is the
verified fraction and the hallucination rate its complement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .bibtex import parse_bibliography
from .errors import EmptyAudit, NoReferencesSection
from .resolve import VERIFIABLE_SCORE, QueryKind, Resolver, ResolverQuery

_DOI = re.compile(r"\b(10\.\d{4,9}/[^\s,;}\]\"']+)")
_YEAR = re.compile(r"\b(19|20)\d{2}\b")
_ITEM_MARKER = re.compile(r"^\s*(?:\[\d+\]|\d+\.)\s+", re.MULTILINE)
_REFS_HEADING = re.compile(r"^\s*(references|bibliography)\s*$", re.IGNORECASE | re.MULTILINE)


@dataclass
class EctrReport:
    total: int
    verified: int
    ectr: float
    hallucination_rate: float
    per_citation: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.verified <= self.total:
            raise ValueError("verified count outside [0, total]")

    def to_dict(self) -> dict:
        return {
            "total_T": self.total,
            "verified_V": self.verified,
            "ectr": self.ectr,
            "hallucination_rate": self.hallucination_rate,
            "per_citation": [dict(p) for p in self.per_citation],
        }


def extract_references(document: Path | str) -> list[str]:
    """One raw string per bibliography item.

    Paths dispatch on suffix: ``.bib`` returns each entry's source text
    (exact), ``.tex`` follows \\bibliography/thebibliography, anything else
    is treated as extracted page text and split on numbered item markers.
    A plain string is treated as extracted page text.
    """
    if isinstance(document, Path):
        text = document.read_text(encoding="utf-8")
        suffix = document.suffix.lower()
        if suffix == ".bib":
            return _from_bib_source(text)
        if suffix == ".tex":
            return _from_tex(text, document.parent)
        return _from_page_text(text)
    return _from_page_text(document)


def _from_bib_source(text: str) -> list[str]:
    entries = parse_bibliography(text)
    if not entries:
        raise NoReferencesSection("bibliography file contains no entries")
    raw: list[str] = []
    pos = 0
    for _entry in entries:
        at = text.find("@", pos)
        depth = 0
        end = at
        for i in range(text.find("{", at), len(text)):
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
                if depth == 0:
                    end = i
                    break
        raw.append(text[at : end + 1])
        pos = end + 1
    return raw


def _from_tex(text: str, base_dir: Path) -> list[str]:
    match = re.search(r"\\bibliography\{([^}]+)\}", text)
    if match:
        name = match.group(1).strip()
        bib_path = base_dir / (name if name.endswith(".bib") else f"{name}.bib")
        if bib_path.exists():
            return _from_bib_source(bib_path.read_text(encoding="utf-8"))
    env = re.search(r"\\begin\{thebibliography\}.*?\\end\{thebibliography\}", text, re.DOTALL)
    if env:
        items = re.split(r"\\bibitem(?:\[[^\]]*\])?\{[^}]*\}", env.group(0))[1:]
        refs = [re.sub(r"\s+", " ", item).strip() for item in items]
        refs = [r.replace("\\end{thebibliography}", "").strip() for r in refs]
        if refs:
            return refs
    raise NoReferencesSection("no bibliography file or thebibliography environment found")


def _from_page_text(text: str) -> list[str]:
    heading = _REFS_HEADING.search(text)
    if not heading:
        raise NoReferencesSection("no references heading in document text")
    tail = text[heading.end():]
    markers = list(_ITEM_MARKER.finditer(tail))
    if not markers:
        raise NoReferencesSection("references section has no recognizable items")
    refs = []
    for i, marker in enumerate(markers):
        end = markers[i + 1].start() if i + 1 < len(markers) else len(tail)
        item = tail[marker.end() : end]
        refs.append(re.sub(r"\s+", " ", item).strip())
    return [r for r in refs if r]


def parse_reference(raw: str) -> dict:
    """Best-effort fields from one raw reference string."""
    if raw.lstrip().startswith("@"):
        try:
            (entry,) = parse_bibliography(raw)
            return {
                "title": entry.fields.get("title", ""),
                "authors": entry.fields.get("author", ""),
                "year": int(entry.fields["year"]) if entry.fields.get("year", "").isdigit() else None,
                "doi": entry.fields.get("doi"),
            }
        except Exception:
            pass
    doi_match = _DOI.search(raw)
    year_match = _YEAR.search(raw)
    segments = [s.strip(" \"'") for s in re.split(r"\.\s+", raw) if s.strip()]
    title = max(segments, key=len) if segments else raw.strip()
    return {
        "title": title,
        "authors": segments[0] if len(segments) > 1 else "",
        "year": int(year_match.group(0)) if year_match else None,
        "doi": doi_match.group(1) if doi_match else None,
    }


def _verify(parsed: dict, resolver: Resolver) -> tuple[bool, dict | None]:
    if parsed.get("doi"):
        hits = resolver.resolve(ResolverQuery(QueryKind.ByDoi, {"doi": parsed["doi"]}))
        if hits and hits[0].match_score >= 1.0:
            return True, hits[0].__dict__
    if parsed.get("title"):
        hits = resolver.resolve(
            ResolverQuery(QueryKind.ByTitleAuthor, {"title": parsed["title"]})
        )
        if hits and hits[0].match_score >= VERIFIABLE_SCORE:
            return True, hits[0].__dict__
    return False, None


def ectr_audit(refs: list[str], resolver: Resolver) -> EctrReport:
    """Match every extracted reference; eCTR = verified / total."""
    if not refs:
        raise EmptyAudit("cannot audit zero references (eCTR undefined)")
    per_citation = []
    verified = 0
    for raw in refs:
        parsed = parse_reference(raw)
        ok, match = _verify(parsed, resolver)
        verified += int(ok)
        per_citation.append(
            {
                "raw": raw,
                "parsed": parsed,
                "match": _hit_summary(match),
                "verdict": "verified" if ok else "unverifiable",
            }
        )
    total = len(refs)
    ectr = verified / total
    return EctrReport(
        total=total,
        verified=verified,
        ectr=ectr,
        hallucination_rate=1.0 - ectr,
        per_citation=per_citation,
    )


def _hit_summary(match: dict | None) -> dict | None:
    if match is None:
        return None
    return {
        "title": match["title"],
        "source": match["source"].value,
        "match_score": match["match_score"],
        "doi": match.get("doi"),
        "year": match.get("year"),
    }
