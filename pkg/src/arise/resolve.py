"""Bibliographic resolution clients and the offline stub resolver.

One resolver interface fronts every external lookup the engine performs:
candidate retrieval during citation prep, fallback metadata search during
knowledge-base construction, citation completion, and the traceability
audit. The ``StubResolver`` serves a fixture corpus so all of those run
offline; live clients (DOI registry, scholarly graph, preprint archive,
generic web search) share the same interface.
"""

from __future__ import annotations

import enum
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from difflib import SequenceMatcher
from pathlib import Path
from typing import Iterable, Protocol

from .errors import NetworkError, NotFoundError, PaywalledError, RateLimited
from .jsonutil import load_json
from .throttle import TokenBucket

logger = logging.getLogger(__name__)

CURRENT_YEAR = 2026

# Hits below these floors are noise, not matches.
TITLE_SCORE_FLOOR = 0.5
SEARCH_SCORE_FLOOR = 0.25

# Normalized-title similarity at or above this counts as a verifiable match.
VERIFIABLE_SCORE = 0.90


class QueryKind(enum.Enum):
    ByDoi = "by_doi"
    ByTitleAuthor = "by_title_author"
    ByUrl = "by_url"
    FreeSearch = "free_search"


class HitSource(enum.Enum):
    DoiRegistry = "doi_registry"
    ScholarGraph = "scholar_graph"
    PreprintArchive = "preprint_archive"
    WebSearch = "web_search"
    Stub = "stub"


class ContentStatus(enum.Enum):
    Full = "full"
    AbstractOnly = "abstract_only"
    IntroOnly = "intro_only"


@dataclass(frozen=True)
class ResolverQuery:
    kind: QueryKind
    payload: dict[str, str]

    def __post_init__(self):
        required = {
            QueryKind.ByDoi: "doi",
            QueryKind.ByTitleAuthor: "title",
            QueryKind.ByUrl: "url",
            QueryKind.FreeSearch: "query",
        }[self.kind]
        if not self.payload.get(required, "").strip():
            raise ValueError(f"{self.kind.value} query requires non-empty '{required}'")


@dataclass
class ResolverHit:
    source: HitSource
    title: str
    authors: list[str] = field(default_factory=list)
    venue: str = ""
    year: int | None = None
    doi: str | None = None
    url: str | None = None
    match_score: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.match_score <= 1.0:
            raise ValueError(f"match_score {self.match_score} outside [0, 1]")
        if self.year is not None and not (1900 <= self.year <= CURRENT_YEAR + 1):
            raise ValueError(f"implausible year {self.year}")


@dataclass
class FetchResult:
    text: str
    status: ContentStatus


def normalize_title(title: str) -> str:
    """Lowercase, strip diacritics and punctuation, collapse whitespace."""
    decomposed = unicodedata.normalize("NFKD", title)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    lowered = stripped.lower()
    cleaned = re.sub(r"[^a-z0-9\s]", " ", lowered)
    return re.sub(r"\s+", " ", cleaned).strip()


def title_similarity(a: str, b: str) -> float:
    """Token-set ratio over normalized titles, in [0, 1].

    Computed fuzzy-style: the shared-token string is compared against each
    side's full token string and the two full strings against each other;
    the best ratio wins. Symmetric, and invariant under case folding,
    whitespace collapse, and diacritic stripping by construction.
    """
    ta = set(normalize_title(a).split())
    tb = set(normalize_title(b).split())
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    inter = " ".join(sorted(ta & tb))
    full_a = (inter + " " + " ".join(sorted(ta - tb))).strip()
    full_b = (inter + " " + " ".join(sorted(tb - ta))).strip()
    pairs = [(inter, full_a), (inter, full_b), (full_a, full_b)]
    return max(SequenceMatcher(None, x, y).ratio() for x, y in pairs)


class Resolver(Protocol):
    def resolve(self, query: ResolverQuery) -> list[ResolverHit]: ...

    def fetch_document(self, url_or_id: str) -> FetchResult: ...


def _sorted_hits(hits: Iterable[ResolverHit]) -> list[ResolverHit]:
    # Stable order: score desc, then title for determinism among ties.
    return sorted(hits, key=lambda h: (-h.match_score, normalize_title(h.title)))


class StubResolver:
    """Offline resolver backed by a fixture corpus.

    Corpus records are JSON objects {doi?, title, authors[], venue, year,
    url?, text?} plus the optional fixture-only fields ``abstract``,
    ``intro``, and ``paywalled`` that drive the partial-content and paywall
    paths. Results are a pure function of (corpus, query).
    """

    def __init__(self, records: list[dict]):
        self.records = list(records)
        self._by_doi = {r["doi"].lower(): r for r in self.records if r.get("doi")}
        self._by_url = {r["url"]: r for r in self.records if r.get("url")}

    @classmethod
    def from_dir(cls, corpus_dir: Path | str) -> "StubResolver":
        corpus_dir = Path(corpus_dir)
        records: list[dict] = []
        for path in sorted(corpus_dir.glob("*.json")):
            loaded = load_json(path)
            records.extend(loaded if isinstance(loaded, list) else [loaded])
        return cls(records)

    def _hit(self, record: dict, score: float) -> ResolverHit:
        return ResolverHit(
            source=HitSource.Stub,
            title=record.get("title", ""),
            authors=list(record.get("authors", [])),
            venue=record.get("venue", ""),
            year=record.get("year"),
            doi=record.get("doi"),
            url=record.get("url"),
            match_score=round(score, 6),
        )

    def resolve(self, query: ResolverQuery) -> list[ResolverHit]:
        if query.kind is QueryKind.ByDoi:
            record = self._by_doi.get(query.payload["doi"].lower())
            return [self._hit(record, 1.0)] if record else []
        if query.kind is QueryKind.ByUrl:
            record = self._by_url.get(query.payload["url"])
            return [self._hit(record, 1.0)] if record else []
        if query.kind is QueryKind.ByTitleAuthor:
            wanted = query.payload["title"]
            hits = []
            for record in self.records:
                score = title_similarity(wanted, record.get("title", ""))
                if score >= TITLE_SCORE_FLOOR:
                    hits.append(self._hit(record, score))
            return _sorted_hits(hits)
        # FreeSearch: rank corpus titles against the query text.
        text = query.payload["query"]
        hits = []
        for record in self.records:
            score = title_similarity(text, record.get("title", ""))
            if score >= SEARCH_SCORE_FLOOR:
                hits.append(self._hit(record, score))
        return _sorted_hits(hits)

    def fetch_document(self, url_or_id: str) -> FetchResult:
        record = self._by_url.get(url_or_id) or self._by_doi.get(url_or_id.lower())
        if record is None:
            raise NotFoundError(f"no fixture document for {url_or_id!r}")
        if record.get("paywalled"):
            raise PaywalledError(f"fixture document {url_or_id!r} is paywalled")
        if record.get("text"):
            return FetchResult(record["text"], ContentStatus.Full)
        if record.get("abstract"):
            return FetchResult(record["abstract"], ContentStatus.AbstractOnly)
        if record.get("intro"):
            return FetchResult(record["intro"], ContentStatus.IntroOnly)
        raise NotFoundError(f"fixture record for {url_or_id!r} carries no content")


# --- live clients -------------------------------------------------------------
#
# Thin HTTP wrappers; every endpoint is throttled and wrapped in the same
# error vocabulary so callers can treat them interchangeably with the stub.

def _http_get(url: str, params: dict | None, limiter: TokenBucket, timeout: float = 15.0):
    import httpx

    limiter.acquire()
    try:
        response = httpx.get(url, params=params, timeout=timeout, follow_redirects=True)
    except httpx.HTTPError as exc:
        raise NetworkError(f"request to {url} failed: {exc}") from exc
    if response.status_code == 429:
        retry_after = float(response.headers.get("retry-after", "1"))
        raise RateLimited(f"rate limited by {url}", retry_after=retry_after)
    if response.status_code == 403:
        raise PaywalledError(url)
    if response.status_code == 404:
        raise NotFoundError(url)
    if response.status_code >= 400:
        raise NetworkError(f"{url} returned {response.status_code}")
    return response


class DoiRegistryClient:
    """CrossRef-style DOI registry lookup."""

    def __init__(self, base_url: str = "https://api.crossref.org", rate: float = 2.0):
        self.base_url = base_url.rstrip("/")
        self._limiter = TokenBucket(rate)

    def resolve(self, query: ResolverQuery) -> list[ResolverHit]:
        if query.kind is QueryKind.ByDoi:
            doi = query.payload["doi"]
            data = _http_get(f"{self.base_url}/works/{doi}", None, self._limiter).json()
            message = data.get("message", {})
            return [self._from_work(message, 1.0)]
        if query.kind in (QueryKind.ByTitleAuthor, QueryKind.FreeSearch):
            text = query.payload.get("title") or query.payload.get("query", "")
            data = _http_get(
                f"{self.base_url}/works", {"query.bibliographic": text, "rows": 5}, self._limiter
            ).json()
            hits = []
            for work in data.get("message", {}).get("items", []):
                title = (work.get("title") or [""])[0]
                hits.append(self._from_work(work, title_similarity(text, title)))
            return _sorted_hits(hits)
        return []

    def _from_work(self, work: dict, score: float) -> ResolverHit:
        year = None
        for key in ("published-print", "published-online", "issued"):
            parts = work.get(key, {}).get("date-parts")
            if parts and parts[0]:
                year = parts[0][0]
                break
        authors = [
            f"{a.get('given', '')} {a.get('family', '')}".strip()
            for a in work.get("author", [])
        ]
        return ResolverHit(
            source=HitSource.DoiRegistry,
            title=(work.get("title") or [""])[0],
            authors=authors,
            venue=(work.get("container-title") or [""])[0],
            year=year if year and 1900 <= year <= CURRENT_YEAR + 1 else None,
            doi=work.get("DOI"),
            url=work.get("URL"),
            match_score=max(0.0, min(1.0, score)),
        )

    def fetch_document(self, url_or_id: str) -> FetchResult:
        raise NotFoundError("DOI registry serves metadata, not documents")


class ScholarGraphClient:
    """Semantic-Scholar-style graph search."""

    def __init__(self, base_url: str = "https://api.semanticscholar.org/graph/v1", rate: float = 1.0):
        self.base_url = base_url.rstrip("/")
        self._limiter = TokenBucket(rate)

    def resolve(self, query: ResolverQuery) -> list[ResolverHit]:
        text = (
            query.payload.get("title")
            or query.payload.get("query")
            or query.payload.get("doi", "")
        )
        params = {"query": text, "limit": 10, "fields": "title,authors,venue,year,externalIds,url,abstract"}
        data = _http_get(f"{self.base_url}/paper/search", params, self._limiter).json()
        hits = []
        for paper in data.get("data", []):
            year = paper.get("year")
            hits.append(
                ResolverHit(
                    source=HitSource.ScholarGraph,
                    title=paper.get("title", ""),
                    authors=[a.get("name", "") for a in paper.get("authors", [])],
                    venue=paper.get("venue", ""),
                    year=year if year and 1900 <= year <= CURRENT_YEAR + 1 else None,
                    doi=(paper.get("externalIds") or {}).get("DOI"),
                    url=paper.get("url"),
                    match_score=title_similarity(text, paper.get("title", "")),
                )
            )
        return _sorted_hits(hits)

    def fetch_document(self, url_or_id: str) -> FetchResult:
        response = _http_get(url_or_id, None, self._limiter)
        return FetchResult(response.text, ContentStatus.Full)


class PreprintArchiveClient:
    """arXiv-style preprint search over the Atom export API."""

    def __init__(self, base_url: str = "https://export.arxiv.org/api/query", rate: float = 0.5):
        self.base_url = base_url
        self._limiter = TokenBucket(rate)

    def resolve(self, query: ResolverQuery) -> list[ResolverHit]:
        text = query.payload.get("title") or query.payload.get("query", "")
        params = {"search_query": f"all:{text}", "max_results": 10}
        body = _http_get(self.base_url, params, self._limiter).text
        hits = []
        for entry in re.findall(r"<entry>(.*?)</entry>", body, re.DOTALL):
            title = re.sub(r"\s+", " ", _tag(entry, "title")).strip()
            year_text = _tag(entry, "published")[:4]
            year = int(year_text) if year_text.isdigit() else None
            hits.append(
                ResolverHit(
                    source=HitSource.PreprintArchive,
                    title=title,
                    authors=re.findall(r"<name>(.*?)</name>", entry),
                    venue="arXiv",
                    year=year if year and 1900 <= year <= CURRENT_YEAR + 1 else None,
                    url=_tag(entry, "id") or None,
                    match_score=title_similarity(text, title),
                )
            )
        return _sorted_hits(hits)

    def fetch_document(self, url_or_id: str) -> FetchResult:
        response = _http_get(url_or_id, None, self._limiter)
        return FetchResult(response.text, ContentStatus.Full)


class WebSearchClient:
    """Generic search/scrape endpoint (publisher portals route through here)."""

    def __init__(self, base_url: str, api_key: str = "", rate: float = 1.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self._limiter = TokenBucket(rate)

    def resolve(self, query: ResolverQuery) -> list[ResolverHit]:
        text = query.payload.get("title") or query.payload.get("query", "")
        params = {"q": text, "api_key": self.api_key}
        data = _http_get(f"{self.base_url}/search", params, self._limiter).json()
        hits = []
        for item in data.get("organic", data.get("results", [])):
            title = item.get("title", "")
            hits.append(
                ResolverHit(
                    source=HitSource.WebSearch,
                    title=title,
                    url=item.get("link") or item.get("url"),
                    match_score=title_similarity(text, title),
                )
            )
        return _sorted_hits(hits)

    def fetch_document(self, url_or_id: str) -> FetchResult:
        response = _http_get(url_or_id, None, self._limiter)
        return FetchResult(response.text, ContentStatus.Full)


def _tag(xml: str, name: str) -> str:
    match = re.search(rf"<{name}[^>]*>(.*?)</{name}>", xml, re.DOTALL)
    return match.group(1) if match else ""


class CompositeResolver:
    """Fans a query out to several clients and merges ranked hits."""

    def __init__(self, clients: list):
        self.clients = list(clients)

    def resolve(self, query: ResolverQuery) -> list[ResolverHit]:
        hits: list[ResolverHit] = []
        for client in self.clients:
            try:
                hits.extend(client.resolve(query))
            except (NetworkError, NotFoundError, PaywalledError) as exc:
                logger.warning("resolver %s failed for %s: %s", type(client).__name__, query.kind, exc)
        return _sorted_hits(hits)

    def fetch_document(self, url_or_id: str) -> FetchResult:
        last_error: Exception | None = None
        for client in self.clients:
            try:
                return client.fetch_document(url_or_id)
            except (NetworkError, NotFoundError, PaywalledError) as exc:
                last_error = exc
        raise last_error if last_error else NotFoundError(url_or_id)
