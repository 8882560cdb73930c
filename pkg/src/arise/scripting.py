"""Builders for deterministic scripted-run fixtures.

A scripted fixture directory holds ``script.json`` (ordered provider
entries) and ``corpus/`` (stub-resolver records). The builders here
fabricate a complete, internally consistent call script for a full
pipeline run: the same code generates the committed demo fixture and the
end-to-end test fixtures, so call order stays aligned with the pipeline.
"""

from __future__ import annotations

import json
from pathlib import Path

from .jsonutil import dump_json
from .outline import sorted_keys
from .rubric import Rubric

__all__ = [
    "split_total",
    "subscores_for_sum",
    "review_payload",
    "reviewer_entry",
    "build_run_script",
    "write_fixture",
]


def split_total(total: float, chunks: int) -> list[int]:
    """Integer chunk sums in [20, 100] whose mean is exactly ``total``.

    ``total * chunks`` must be (near-)integral, e.g. one-decimal totals
    need a chunk count that is a multiple of 10.
    """
    target = round(total * chunks)
    if abs(target - total * chunks) > 1e-6:
        raise ValueError(f"total {total} cannot be split over {chunks} integer chunk sums")
    base, rem = divmod(target, chunks)
    sums = [base + 1] * rem + [base] * (chunks - rem)
    if not all(20 <= s <= 100 for s in sums):
        raise ValueError(f"chunk sums {set(sums)} leave the 20..100 rubric range")
    return sums


def subscores_for_sum(rubric: Rubric, total: int) -> dict[str, dict[str, int]]:
    """Distribute one chunk total over the 20 subcriteria, each in 1..5."""
    pairs = rubric.subcriterion_pairs
    if not len(pairs) <= total <= 5 * len(pairs):
        raise ValueError(f"chunk total {total} outside [{len(pairs)}, {5 * len(pairs)}]")
    base, rem = divmod(total, len(pairs))
    nested: dict[str, dict[str, int]] = {}
    for i, (dim, sub) in enumerate(pairs):
        nested.setdefault(dim, {})[sub] = base + (1 if i < rem else 0)
    return nested


def review_payload(
    rubric: Rubric,
    total: int,
    suggestions: list[str] | None = None,
    decision: str = "minor revision",
) -> dict:
    return {
        "subscores": subscores_for_sum(rubric, total),
        "comments": {dim.name: f"{dim.name} assessed." for dim in rubric.dimensions},
        "suggestions": list(suggestions or []),
        "summary": "Chunk reviewed against the full rubric.",
        "strengths": "Clear structure and grounded citations.",
        "weaknesses": "Some sections could integrate sources more tightly.",
        "decision": decision,
    }


def reviewer_entry(
    rubric: Rubric,
    total: int,
    reviewer_label: str | None = None,
    times: int = 1,
    suggestions: list[str] | None = None,
    decision: str = "minor revision",
) -> dict:
    entry: dict = {
        "template_id": "reviewer",
        "times": times,
        "response": review_payload(rubric, total, suggestions, decision),
    }
    if reviewer_label is not None:
        entry["prompt_regex"] = f"Reviewer identity: {json.dumps(reviewer_label)[1:-1]}"
    return entry


def _summary_text(title: str, n_words: int = 110) -> str:
    base = (
        f"This work, {title}, develops its central method, evaluates it against "
        "prior approaches, and reports consistent improvements. "
    )
    filler = (
        "The study motivates the problem, describes the mechanism in detail, "
        "and discusses limitations alongside future directions. "
    )
    words = (base + filler * 12).split()
    return " ".join(words[:n_words])


def build_run_script(
    corpus: list[dict],
    subtopics: list[str],
    rubric: Rubric,
    batch_size: int = 8,
    accept_total: int = 100,
) -> list[dict]:
    """Script a full pipeline run over ``corpus`` ending in round-0 accept.

    Entries are emitted in the exact order the sequential pipeline issues
    calls; reviewer entries use a generous repeat count because the chunk
    count depends on the rendered draft length.
    """
    entries, _details = _script_compose_base(corpus, subtopics, batch_size)
    entries.append(reviewer_entry(rubric, accept_total, times=400, decision="accept"))
    return entries


def _script_compose_base(
    corpus: list[dict],
    subtopics: list[str],
    batch_size: int,
) -> tuple[list[dict], dict]:
    """Everything up to (and excluding) review scripting.

    Returns the entry list plus the fabricated composition details needed
    to predict the assembled draft exactly: section dicts in order, final
    (post-editor) bodies, title, and abstract.
    """
    entries: list[dict] = []
    n = len(corpus)
    keys = [f"ref{i}" for i in range(1, n + 1)]

    entries.append({"template_id": "topic_expansion", "response": {"subtopics": subtopics}})
    entries.append(
        {
            "template_id": "domain_scoping",
            "response": {
                "entries": [
                    {
                        "subtopic": topic,
                        "sources": [{"kind": "search_index", "name": "stub-corpus"}],
                    }
                    for topic in subtopics
                ]
            },
        }
    )
    for key, record in zip(keys, corpus):
        entries.append(
            {
                "template_id": "source_summarizer",
                "prompt_regex": rf"Citation key: {key}\b",
                "response": {"summary": _summary_text(record["title"])},
            }
        )

    # Partial outlines: two sections per batch, then lossless merges.
    batches = [keys[i : i + batch_size] for i in range(0, n, batch_size)]
    batch_titles: list[list[dict]] = []
    for b, batch in enumerate(batches):
        half = (len(batch) + 1) // 2
        sections = [
            {"title": f"Theme {b + 1}A: Foundations", "cite_keys": batch[:half], "children": []},
            {"title": f"Theme {b + 1}B: Applications", "cite_keys": batch[half:], "children": []},
        ]
        sections = [s for s in sections if s["cite_keys"]]
        batch_titles.append(sections)
        entries.append({"template_id": "outline_writer", "response": {"sections": sections}})

    outlines = batch_titles
    while len(outlines) > 1:
        next_round: list[list[dict]] = []
        for i in range(0, len(outlines) - 1, 2):
            combined = outlines[i] + outlines[i + 1]
            entries.append({"template_id": "outline_merger", "response": {"sections": combined}})
            entries.append(
                {"template_id": "outline_validator", "response": {"coherent": True, "issues": []}}
            )
            next_round.append(combined)
        if len(outlines) % 2 == 1:
            next_round.append(outlines[-1])
        outlines = next_round
    merged = outlines[0]

    # Composition: every section body cites exactly its keys, then an
    # identity-style edit, then title and abstract.
    final_bodies: dict[str, str] = {}
    for section in merged:
        markers = "".join(f"[{k[3:]}]" for k in sorted_keys(set(section["cite_keys"])))
        body = (
            f"{section['title']} synthesizes the surveyed evidence {markers}. "
            "The works above are compared along method, data, and findings, "
            "and their shared limitations motivate the next section. "
        ) * 3
        edited = body + "\n%%TABLE-PLACEHOLDER%%"
        final_bodies[section["title"]] = edited
        entries.append(
            {
                "template_id": "section_writer",
                "prompt_regex": rf"Section to write: {section['title']}",
                "response": {"body": body},
            }
        )
        entries.append(
            {
                "template_id": "section_editor",
                "prompt_regex": rf"{section['title']} synthesizes",
                "response": {"body": edited},
            }
        )
    title = "A Scripted Survey of the Field"
    abstract = _summary_text("this survey", 130)
    entries.append({"template_id": "title_generator", "response": {"title": title}})
    entries.append({"template_id": "abstract_generator", "response": {"abstract": abstract}})

    details = {
        "sections": merged,
        "final_bodies": final_bodies,
        "title": title,
        "abstract": abstract,
    }
    return entries, details


def build_trajectory_script(
    corpus: list[dict],
    subtopics: list[str],
    rubric: Rubric,
    reviewer_labels: list[str],
    round_totals: list[tuple[float, ...]],
    batch_size: int = 8,
    chunks: int = 10,
    chunk_pages: int = 3,
) -> list[dict]:
    """Script a run whose refinement replays a given per-reviewer trajectory.

    Reviewer document totals are chunk-sum means, so the composed draft is
    padded to exactly ``chunks * chunk_pages`` estimator pages (one-decimal
    totals need a chunk count that is a multiple of 10). Revision rounds
    use identity rewrites of the first section, which keeps pagination and
    citation sets stable from round to round.
    """
    import re as _re

    from .compose import Draft, Section, render_plaintext
    from .refine import CHARS_PER_PAGE

    entries, details = _script_compose_base(corpus, subtopics, batch_size)

    # Predict the assembled draft and pad the last editor reply so the
    # plaintext rendering spans exactly the target page count.
    sections = [
        Section(
            section_id=str(i),
            heading=s["title"],
            level=1,
            body=details["final_bodies"][s["title"]],
            cite_keys=set(s["cite_keys"]),
        )
        for i, s in enumerate(details["sections"], start=1)
    ]
    draft = Draft(sections=sections, title=details["title"], abstract=details["abstract"])
    target_length = (chunks * chunk_pages - 1) * CHARS_PER_PAGE + CHARS_PER_PAGE // 2
    shortfall = target_length - len(render_plaintext(draft))
    if shortfall < 0:
        raise ValueError(f"composed draft already exceeds {target_length} chars")
    filler_unit = "Extended discussion of methodology and context continues here. "
    filler = filler_unit * (shortfall // len(filler_unit) + 1)
    last_title = details["sections"][-1]["title"]
    padded = details["final_bodies"][last_title] + "\n" + filler[:shortfall - 1]
    for entry in reversed(entries):
        if entry["template_id"] == "section_editor":
            entry["response"] = {"body": padded}
            break
    sections[-1].body = padded
    pages = -(-len(render_plaintext(draft)) // CHARS_PER_PAGE)
    if pages != chunks * chunk_pages:
        raise ValueError(f"padding produced {pages} pages, wanted {chunks * chunk_pages}")

    # Reviews per round, then one identity revision of the first section
    # for every round below the threshold but within budget.
    for totals in round_totals:
        if len(totals) != len(reviewer_labels):
            raise ValueError("one total per reviewer per round")
        for label, total in zip(reviewer_labels, totals):
            for chunk_sum in split_total(total, chunks):
                entries.append(
                    reviewer_entry(
                        rubric,
                        chunk_sum,
                        reviewer_label=label,
                        suggestions=["Tighten the synthesis in the opening section"],
                    )
                )
    first = sections[0]
    for _ in range(len(round_totals) - 1):
        entries.append(
            {
                "template_id": "meta_reviewer",
                "response": {
                    "items": [
                        {
                            "target_section": first.section_id,
                            "issue": "tighten the synthesis in the opening section",
                            "sources": [
                                {"reviewer": label, "chunk_index": 0} for label in reviewer_labels
                            ],
                        }
                    ]
                },
            }
        )
        entries.append(
            {
                "template_id": "section_reviser",
                "prompt_regex": rf"Section: {_re.escape(first.heading)}",
                "response": {"body": first.body},
            }
        )
    return entries


def write_fixture(
    fixture_dir: Path | str,
    corpus: list[dict],
    script: list[dict],
) -> None:
    fixture_dir = Path(fixture_dir)
    dump_json(fixture_dir / "script.json", script)
    dump_json(fixture_dir / "corpus" / "records.json", corpus)
