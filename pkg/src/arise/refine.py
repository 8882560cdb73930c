"""Rubric-guided iterative refinement control loop.

Each round: chunk the rendered draft into contiguous page spans, have every
reviewer score every chunk against the rubric, average reviewer totals,
and accept at the threshold. Below it, a meta-review synthesizes the
feedback into a section-targeted plan and the reviser rewrites only those
sections, grounded only in their existing evidence (untargeted sections
stay byte-identical, revised ones may not gain citation keys).
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field

from .agents import WRITER_TEMPERATURE
from .compose import Draft, extract_cite_keys, render_plaintext, strip_keys
from .errors import EmptyDocument, EmptyInput, ReviewParseFailure, SchemaViolation
from .gateway import AgentCall, Gateway, ModelIdentity
from .kb import CkmStore
from .rubric import Rubric

logger = logging.getLogger(__name__)

CHARS_PER_PAGE = 3500  # fallback page estimator for unrendered drafts
DEFAULT_CHUNK_PAGES = 3


class LoopDecision(enum.Enum):
    Accept = "accept"
    Revise = "revise"
    StopMaxRounds = "stop_max_rounds"


class ReviewDecision(enum.Enum):
    Accept = "accept"
    MinorRevision = "minor revision"
    MajorRevision = "major revision"
    Reject = "reject"


@dataclass
class Chunk:
    index: int
    page_range: tuple[int, int]  # 1-based inclusive
    text: str


@dataclass
class Review:
    reviewer: ModelIdentity
    round_t: int
    chunk_index: int
    subscores: dict[tuple[str, str], int]
    comments: dict[str, str]
    suggestions: list[str]
    summary: str
    strengths: str
    weaknesses: str
    decision: ReviewDecision

    def total(self) -> int:
        return sum(self.subscores.values())

    def to_dict(self) -> dict:
        nested: dict[str, dict[str, int]] = {}
        for (dim, sub), score in self.subscores.items():
            nested.setdefault(dim, {})[sub] = score
        return {
            "reviewer": {
                "family": self.reviewer.family,
                "model_name": self.reviewer.model_name,
                "role_tag": self.reviewer.role_tag,
            },
            "round_t": self.round_t,
            "chunk_index": self.chunk_index,
            "subscores": nested,
            "comments": dict(self.comments),
            "suggestions": list(self.suggestions),
            "summary": self.summary,
            "strengths": self.strengths,
            "weaknesses": self.weaknesses,
            "decision": self.decision.value,
            "total": self.total(),
        }


@dataclass
class RevisionPlan:
    round_t: int
    items: list[dict] = field(default_factory=list)
    # item: {target_section_id, issue, source_reviews: [(reviewer, chunk)], flags}

    def to_dict(self) -> dict:
        return {"round_t": self.round_t, "items": [dict(i) for i in self.items]}

    def target_ids(self) -> set[str]:
        return {item["target_section_id"] for item in self.items}


def paginate(text: str, chars_per_page: int = CHARS_PER_PAGE) -> list[str]:
    """Fixed-size page estimator; concatenation reproduces the text exactly."""
    if not text:
        return []
    return [text[i : i + chars_per_page] for i in range(0, len(text), chars_per_page)]


def chunk_document(pages: list[str], chunk_pages: int = DEFAULT_CHUNK_PAGES) -> list[Chunk]:
    """Group pages into contiguous, non-overlapping chunks covering the document."""
    if not pages:
        raise EmptyDocument("no pages to chunk")
    if chunk_pages < 1:
        raise ValueError("chunk_pages must be >= 1")
    chunks = []
    for index, start in enumerate(range(0, len(pages), chunk_pages)):
        group = pages[start : start + chunk_pages]
        chunks.append(
            Chunk(
                index=index,
                page_range=(start + 1, start + len(group)),
                text="".join(group),
            )
        )
    return chunks


def parse_review(
    payload: dict,
    rubric: Rubric,
    reviewer: ModelIdentity,
    round_t: int,
    chunk_index: int,
) -> Review:
    """Validate a reviewer reply against the rubric: exactly the 20 cells."""
    expected = rubric.subcriterion_pairs
    subscores: dict[tuple[str, str], int] = {}
    nested = payload["subscores"]
    for dim, sub in expected:
        try:
            score = nested[dim][sub]
        except (KeyError, TypeError):
            raise ReviewParseFailure(f"missing subscore for {dim}/{sub}") from None
        if not isinstance(score, int) or not 1 <= score <= 5:
            raise ReviewParseFailure(f"subscore {dim}/{sub}={score!r} outside 1..5")
        subscores[(dim, sub)] = score
    total_cells = sum(len(subs) for subs in nested.values())
    if total_cells != len(expected):
        raise ReviewParseFailure(f"expected {len(expected)} subscores, got {total_cells}")
    try:
        decision = ReviewDecision(payload["decision"])
    except ValueError:
        raise ReviewParseFailure(f"unknown decision {payload['decision']!r}") from None
    return Review(
        reviewer=reviewer,
        round_t=round_t,
        chunk_index=chunk_index,
        subscores=subscores,
        comments=dict(payload["comments"]),
        suggestions=list(payload["suggestions"]),
        summary=payload["summary"],
        strengths=payload["strengths"],
        weaknesses=payload["weaknesses"],
        decision=decision,
    )


@dataclass
class RoundScores:
    totals: dict[str, float]  # reviewer label -> document total
    reviews: list[Review]
    missing_cells: list[tuple[str, int]]  # (reviewer label, chunk index)


ReviewerPool = list[tuple[ModelIdentity, Gateway]]


def exclude_family(pool: ReviewerPool, family: str) -> ReviewerPool:
    """Bi-judge filter: drop reviewers from the generator's model family."""
    return [(ident, gw) for ident, gw in pool if ident.family != family]


def score_round(
    chunks: list[Chunk],
    pool: ReviewerPool,
    rubric: Rubric,
    round_t: int = 0,
) -> RoundScores:
    """Every reviewer scores every chunk; totals are chunk-sum means.

    A cell whose reply stays unusable after the gateway's repair attempt is
    marked missing and the reviewer's total is computed over the chunks
    that parsed, flagged in the log.
    """
    if not pool:
        raise ValueError("reviewer pool must be non-empty")
    rubric_block = rubric.prompt_block()
    totals: dict[str, float] = {}
    reviews: list[Review] = []
    missing: list[tuple[str, int]] = []
    for identity, gateway in pool:
        chunk_sums: list[int] = []
        for chunk in chunks:
            call = AgentCall(
                template_id="reviewer",
                variables={
                    "reviewer": identity.label,
                    "chunk_index": chunk.index,
                    "page_range": f"{chunk.page_range[0]}-{chunk.page_range[1]}",
                    "chunk_text": chunk.text,
                    "rubric_block": rubric_block,
                },
                expected_schema="review",
            )
            try:
                payload = gateway.complete(call)
                review = parse_review(payload, rubric, identity, round_t, chunk.index)
            except (SchemaViolation, ReviewParseFailure) as exc:
                logger.warning(
                    "review cell (%s, chunk %d) unusable: %s", identity.label, chunk.index, exc
                )
                missing.append((identity.label, chunk.index))
                continue
            reviews.append(review)
            chunk_sums.append(review.total())
        if not chunk_sums:
            logger.error("reviewer %s produced no usable chunk reviews", identity.label)
            continue
        totals[identity.label] = sum(chunk_sums) / len(chunk_sums)
    return RoundScores(totals=totals, reviews=reviews, missing_cells=missing)


def aggregate(totals: list[float]) -> float:
    """Unweighted mean of reviewer totals."""
    if not totals:
        raise EmptyInput("no reviewer totals to aggregate")
    return sum(totals) / len(totals)


def decide(avg: float, tau: float, round_t: int, max_rounds: int) -> LoopDecision:
    """Accept at or above tau; stop at the round budget; otherwise revise."""
    if avg >= tau:
        return LoopDecision.Accept
    if round_t >= max_rounds:
        return LoopDecision.StopMaxRounds
    return LoopDecision.Revise


def _normalize_issue(text: str) -> str:
    return re.sub(r"\s+", " ", re.sub(r"[^a-z0-9\s]", "", text.lower())).strip()


def _section_page_spans(draft: Draft, chars_per_page: int = CHARS_PER_PAGE) -> list[tuple[str, int, int]]:
    """(section_id, first_page, last_page) under the plaintext page estimator."""
    spans = []
    offset = 0
    full = render_plaintext(draft)
    for section in draft.sections:
        marker = f"{'#' * section.level} {section.heading}\n"
        start = full.find(marker, offset)
        if start < 0:
            start = offset
        end = start + len(marker) + len(section.body)
        spans.append((section.section_id, start // chars_per_page + 1, max(start, end - 1) // chars_per_page + 1))
        offset = end
    return spans


def _section_for_chunk(
    spans: list[tuple[str, int, int]], chunk_index: int, chunk_pages: int
) -> str:
    first_page = chunk_index * chunk_pages + 1
    last_page = first_page + chunk_pages - 1
    best_id, best_overlap = spans[0][0] if spans else "", -1
    for section_id, lo, hi in spans:
        overlap = min(hi, last_page) - max(lo, first_page)
        if overlap > best_overlap:
            best_id, best_overlap = section_id, overlap
    return best_id


def _match_section(target: str, draft: Draft) -> str | None:
    ids = {s.section_id for s in draft.sections}
    if target in ids:
        return target
    wanted = _normalize_issue(target)
    for section in draft.sections:
        if _normalize_issue(section.heading) == wanted:
            return section.section_id
    for section in draft.sections:
        if wanted and wanted in _normalize_issue(section.heading):
            return section.section_id
    return None


def synthesize_plan(
    reviews: list[Review],
    draft: Draft,
    gateway: Gateway,
    round_t: int,
    chunk_pages: int = DEFAULT_CHUNK_PAGES,
) -> RevisionPlan:
    """Meta-review: fold all reviewer feedback into a section-targeted plan.

    Items are deduplicated by (section, normalized issue); an item whose
    section cannot be matched is attached to the section spanning its
    source chunk's pages and flagged. With no suggestions anywhere, a
    synthetic item targets the lowest-scoring rubric cell.
    """
    spans = _section_page_spans(draft)

    if not any(r.suggestions for r in reviews):
        worst = min(
            ((review, cell, score) for review in reviews for cell, score in review.subscores.items()),
            key=lambda t: (t[2], t[1], t[0].chunk_index),
        )
        review, (dim, sub), _score = worst
        cells = [
            (r.reviewer.label, r.chunk_index)
            for r in reviews
            if r.subscores[(dim, sub)] == worst[2]
        ]
        section_id = _section_for_chunk(spans, review.chunk_index, chunk_pages)
        return RevisionPlan(
            round_t=round_t,
            items=[
                {
                    "target_section_id": section_id,
                    "issue": f"raise lowest-scoring dimension: {dim}/{sub}",
                    "source_reviews": cells,
                    "flags": ["synthetic"],
                }
            ],
        )

    digest_lines = []
    for review in reviews:
        for suggestion in review.suggestions:
            digest_lines.append(
                f"- [{review.reviewer.label} / chunk {review.chunk_index}] {suggestion}"
            )
    section_list = "\n".join(f"{s.section_id}: {s.heading}" for s in draft.sections)
    call = AgentCall(
        template_id="meta_reviewer",
        variables={"reviews_digest": "\n".join(digest_lines), "section_list": section_list},
        expected_schema="revision_plan",
    )
    payload = gateway.complete(call)

    deduped: dict[tuple[str, str], dict] = {}
    for item in payload["items"]:
        flags: list[str] = []
        section_id = _match_section(item["target_section"], draft)
        sources = [(s["reviewer"], s["chunk_index"]) for s in item["sources"]]
        if section_id is None:
            anchor_chunk = sources[0][1] if sources else 0
            section_id = _section_for_chunk(spans, anchor_chunk, chunk_pages)
            flags.append("unmappable_issue_reattached")
            logger.warning(
                "plan item %r had no matching section; attached to %s", item["target_section"], section_id
            )
        key = (section_id, _normalize_issue(item["issue"]))
        if key in deduped:
            merged = deduped[key]
            merged["source_reviews"] = list(dict.fromkeys(merged["source_reviews"] + sources))
            continue
        deduped[key] = {
            "target_section_id": section_id,
            "issue": item["issue"],
            "source_reviews": sources,
            "flags": flags,
        }

    items = list(deduped.values())
    if not items:
        raise ValueError("meta-review produced an empty plan from non-empty suggestions")
    return RevisionPlan(round_t=round_t, items=items)


def apply_elsr(draft: Draft, plan: RevisionPlan, ckm: CkmStore, gateway: Gateway) -> Draft:
    """Evidence-locked sectional revision.

    Only plan-targeted sections change; each revised body may cite only the
    section's existing evidence keys (foreign keys are stripped), and a
    section whose revision fails to parse is carried over unchanged.
    """
    issues_by_section: dict[str, list[str]] = {}
    for item in plan.items:
        issues_by_section.setdefault(item["target_section_id"], []).append(item["issue"])

    new_sections = []
    for section in draft.sections:
        if section.section_id not in issues_by_section:
            new_sections.append(section)  # untargeted: carried over verbatim
            continue
        evidence, _missing = ckm.query(section.cite_keys)
        rendered_evidence = "\n".join(
            f"[{int(k[3:])}] ({k}): {v}" for k, v in evidence.items()
        ) or "(none - structural section)"
        call = AgentCall(
            template_id="section_reviser",
            variables={
                "heading": section.heading,
                "body": section.body,
                "issues": "\n".join(f"- {i}" for i in issues_by_section[section.section_id]),
                "evidence": rendered_evidence,
            },
            expected_schema="section_body",
            temperature=WRITER_TEMPERATURE,
        )
        flags = list(section.flags)
        try:
            revised = gateway.complete(call)["body"]
        except SchemaViolation as exc:
            logger.warning("revision of %s failed to parse; kept original: %s", section.section_id, exc)
            flags.append("revision_parse_failure")
            new_sections.append(
                type(section)(
                    section_id=section.section_id,
                    heading=section.heading,
                    level=section.level,
                    body=section.body,
                    cite_keys=set(section.cite_keys),
                    flags=flags,
                )
            )
            continue
        allowed = set(section.cite_keys)
        foreign = extract_cite_keys(revised) - allowed
        if foreign:
            logger.warning(
                "revision of %s introduced foreign keys %s; stripped", section.section_id, sorted(foreign)
            )
            revised = strip_keys(revised, foreign)
            flags.append("stripped_foreign_keys_in_revision")
        new_sections.append(
            type(section)(
                section_id=section.section_id,
                heading=section.heading,
                level=section.level,
                body=revised,
                cite_keys=allowed,
                flags=flags,
            )
        )
    return Draft(sections=new_sections, title=draft.title, abstract=draft.abstract)


@dataclass
class RoundRecord:
    round_t: int
    totals: dict[str, float]
    average: float
    decision: LoopDecision
    reviews: list[Review]
    plan: RevisionPlan | None
    draft: Draft
    missing_cells: list[tuple[str, int]]


def run_refinement(
    draft0: Draft,
    pool: ReviewerPool,
    ckm: CkmStore,
    rubric: Rubric,
    meta_gateway: Gateway,
    tau: float,
    max_rounds: int,
    chunk_pages: int = DEFAULT_CHUNK_PAGES,
    render_pages=None,
    round_hook=None,
) -> tuple[Draft, list[float], list[RoundRecord]]:
    """Score -> aggregate -> decide -> (plan -> revise) until accept or budget.

    ``render_pages`` maps a draft to page texts (defaults to the plaintext
    page estimator); ``round_hook`` is called with each RoundRecord as it
    completes, which is where runs persist their audit trail.
    """
    if render_pages is None:
        render_pages = lambda draft: paginate(render_plaintext(draft))  # noqa: E731

    draft = draft0
    trajectory: list[float] = []
    records: list[RoundRecord] = []
    round_t = 0
    while True:
        chunks = chunk_document(render_pages(draft), chunk_pages)
        scores = score_round(chunks, pool, rubric, round_t)
        avg = aggregate(list(scores.totals.values()))
        trajectory.append(avg)
        decision = decide(avg, tau, round_t, max_rounds)
        plan = None
        if decision is LoopDecision.Revise:
            plan = synthesize_plan(scores.reviews, draft, meta_gateway, round_t, chunk_pages)
        record = RoundRecord(
            round_t=round_t,
            totals=dict(scores.totals),
            average=avg,
            decision=decision,
            reviews=scores.reviews,
            plan=plan,
            draft=draft,
            missing_cells=scores.missing_cells,
        )
        records.append(record)
        if round_hook is not None:
            round_hook(record)
        if decision is not LoopDecision.Revise:
            return draft, trajectory, records
        draft = apply_elsr(draft, plan, ckm, meta_gateway)
        round_t += 1
