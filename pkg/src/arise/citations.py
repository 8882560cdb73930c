"""Citation preparation: fan-out retrieval, normalization, dedup, validation.

Candidates are gathered per (subtopic, source) pair through the resolver,
unified in stable retrieval order, cleaned of malformed entries, merged
where near-duplicate, and renumbered into the contiguous ref1..refK index
every later stage keys on.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from .errors import AllPairsFailed, NetworkError, NotFoundError, PaywalledError
from .resolve import CURRENT_YEAR, QueryKind, Resolver, ResolverQuery, title_similarity
from .topics import SourcePlan

logger = logging.getLogger(__name__)

DEFAULT_CANDIDATES_PER_PAIR = 20
NEAR_DUP_SIMILARITY = 0.90


class CitationStatus(enum.Enum):
    Candidate = "candidate"
    Curated = "curated"
    Completed = "completed"


@dataclass
class Citation:
    ref_id: str
    title: str
    authors: list[str] = field(default_factory=list)
    venue: str = ""
    year: int | None = None
    url: str | None = None
    doi: str | None = None
    status: CitationStatus = CitationStatus.Candidate
    provenance: tuple[str, str] = ("", "")  # (subtopic, source name)

    @property
    def number(self) -> int:
        return int(self.ref_id[3:])

    def field_count(self) -> int:
        return sum(
            1
            for v in (self.title, self.authors, self.venue, self.year, self.url, self.doi)
            if v
        )

    def to_dict(self) -> dict:
        return {
            "ref_id": self.ref_id,
            "title": self.title,
            "authors": list(self.authors),
            "venue": self.venue,
            "year": self.year,
            "url": self.url,
            "doi": self.doi,
            "status": self.status.value,
            "provenance": list(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Citation":
        return cls(
            ref_id=data["ref_id"],
            title=data["title"],
            authors=list(data["authors"]),
            venue=data.get("venue", ""),
            year=data.get("year"),
            url=data.get("url"),
            doi=data.get("doi"),
            status=CitationStatus(data["status"]),
            provenance=tuple(data.get("provenance", ("", ""))),
        )


@dataclass
class CurationReport:
    retrieved: int
    deduplicated: int
    malformed_dropped: int
    curated: int

    def __post_init__(self):
        if self.curated != self.retrieved - self.deduplicated - self.malformed_dropped:
            raise ValueError("curation arithmetic does not hold")

    def to_dict(self) -> dict:
        return {
            "retrieved": self.retrieved,
            "deduplicated": self.deduplicated,
            "malformed_dropped": self.malformed_dropped,
            "curated": self.curated,
        }


@dataclass
class RetrievalOutcome:
    candidates: list[Citation]
    failures: list[dict]


def retrieve_candidates(
    plan: SourcePlan,
    resolver: Resolver,
    per_pair: int = DEFAULT_CANDIDATES_PER_PAIR,
) -> RetrievalOutcome:
    """Gather candidate references for every (subtopic, source) pair.

    Individual pair failures are recorded and skipped; only a total wipeout
    raises AllPairsFailed.
    """
    if not plan.entries:
        raise ValueError("source plan is empty")
    candidates: list[Citation] = []
    failures: list[dict] = []
    succeeded = 0
    counter = 0
    for subtopic, sources in plan.entries:
        for source in sources:
            query = ResolverQuery(QueryKind.FreeSearch, {"query": subtopic, "source": source.name})
            try:
                hits = resolver.resolve(query)[:per_pair]
            except (NetworkError, NotFoundError, PaywalledError) as exc:
                logger.warning("retrieval failed for (%s, %s): %s", subtopic, source.name, exc)
                failures.append({"subtopic": subtopic, "source": source.name, "error": str(exc)})
                continue
            succeeded += 1
            for hit in hits:
                counter += 1
                candidates.append(
                    Citation(
                        ref_id=f"ref{counter}",
                        title=hit.title,
                        authors=list(hit.authors),
                        venue=hit.venue,
                        year=hit.year,
                        url=hit.url,
                        doi=hit.doi,
                        status=CitationStatus.Candidate,
                        provenance=(subtopic, source.name),
                    )
                )
    if succeeded == 0:
        raise AllPairsFailed(f"all {len(failures)} retrieval pairs failed")
    return RetrievalOutcome(candidates=candidates, failures=failures)


def _is_malformed(citation: Citation) -> bool:
    if not citation.title.strip():
        return True
    if not citation.authors:
        return True
    if citation.year is not None and not (1900 <= citation.year <= CURRENT_YEAR + 1):
        return True
    return False


def _near_duplicate(a: Citation, b: Citation) -> bool:
    if a.doi and b.doi and a.doi.lower() == b.doi.lower():
        return True
    return title_similarity(a.title, b.title) >= NEAR_DUP_SIMILARITY


def _merge_group(group: list[Citation]) -> Citation:
    # Prefer the record with a DOI, then the one with more non-empty fields;
    # remaining gaps are filled from the others. Earliest provenance wins.
    ranked = sorted(
        group,
        key=lambda c: (c.doi is None, -c.field_count(), c.number),
    )
    best = ranked[0]
    merged = Citation(
        ref_id=best.ref_id,
        title=best.title,
        authors=list(best.authors),
        venue=best.venue,
        year=best.year,
        url=best.url,
        doi=best.doi,
        status=CitationStatus.Curated,
        provenance=group[0].provenance,
    )
    for other in ranked[1:]:
        merged.authors = merged.authors or list(other.authors)
        merged.venue = merged.venue or other.venue
        merged.year = merged.year if merged.year is not None else other.year
        merged.url = merged.url or other.url
        merged.doi = merged.doi or other.doi
    return merged


def dedupe_and_validate(candidates: list[Citation]) -> tuple[list[Citation], CurationReport]:
    """Merge near-duplicates, drop malformed entries, renumber ref1..refK.

    Near-duplicate means an exact DOI match or normalized-title similarity
    at or above 0.90; no two curated records may remain related that way.
    Total function: empty input yields an empty curated list.
    """
    retrieved = len(candidates)
    well_formed = [c for c in candidates if not _is_malformed(c)]
    malformed_dropped = retrieved - len(well_formed)

    # Union-find over near-duplicate pairs keeps merge groups transitive.
    parent = list(range(len(well_formed)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for i in range(len(well_formed)):
        for j in range(i + 1, len(well_formed)):
            if _near_duplicate(well_formed[i], well_formed[j]):
                union(i, j)

    groups: dict[int, list[Citation]] = {}
    order: list[int] = []
    for i, citation in enumerate(well_formed):
        root = find(i)
        if root not in groups:
            groups[root] = []
            order.append(root)
        groups[root].append(citation)

    curated: list[Citation] = []
    deduplicated = 0
    for root in order:
        group = groups[root]
        deduplicated += len(group) - 1
        curated.append(_merge_group(group))

    for n, citation in enumerate(curated, start=1):
        citation.ref_id = f"ref{n}"
        citation.status = CitationStatus.Curated

    report = CurationReport(
        retrieved=retrieved,
        deduplicated=deduplicated,
        malformed_dropped=malformed_dropped,
        curated=len(curated),
    )
    return curated, report
