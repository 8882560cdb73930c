"""Behaviorally anchored review rubric: 7 dimensions, 20 subcriteria, 1-5 anchors.

A complete review scores every subcriterion once, so totals live in
[20, 100]. The built-in instrument below is the engine's default; custom
rubrics load from JSON but must keep the same 7x20 shape and full anchor
coverage.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import RubricInvalid
from .jsonutil import load_json

REQUIRED_DIMENSIONS = 7
REQUIRED_SUBCRITERIA = 20
SCORE_MIN, SCORE_MAX = 1, 5


@dataclass(frozen=True)
class Subcriterion:
    name: str
    anchors: dict[int, str]


@dataclass(frozen=True)
class Dimension:
    name: str
    subcriteria: tuple[Subcriterion, ...]


@dataclass(frozen=True)
class Rubric:
    dimensions: tuple[Dimension, ...]

    @property
    def subcriterion_pairs(self) -> list[tuple[str, str]]:
        """All (dimension, subcriterion) pairs in rubric order."""
        return [(d.name, s.name) for d in self.dimensions for s in d.subcriteria]

    @property
    def min_total(self) -> int:
        return len(self.subcriterion_pairs) * SCORE_MIN

    @property
    def max_total(self) -> int:
        return len(self.subcriterion_pairs) * SCORE_MAX

    def to_dict(self) -> dict:
        return {
            "dimensions": [
                {
                    "name": d.name,
                    "subcriteria": [
                        {"name": s.name, "anchors": {str(k): v for k, v in sorted(s.anchors.items())}}
                        for s in d.subcriteria
                    ],
                }
                for d in self.dimensions
            ]
        }

    def prompt_block(self) -> str:
        """Plain-text rendering injected into reviewer prompts."""
        lines = []
        for dim in self.dimensions:
            lines.append(f"## {dim.name}")
            for sub in dim.subcriteria:
                lines.append(f"- {sub.name}:")
                for score in range(SCORE_MIN, SCORE_MAX + 1):
                    lines.append(f"    {score} = {sub.anchors[score]}")
        return "\n".join(lines)


def _validate(rubric: Rubric) -> Rubric:
    if len(rubric.dimensions) != REQUIRED_DIMENSIONS:
        raise RubricInvalid(
            f"rubric must have exactly {REQUIRED_DIMENSIONS} dimensions, got {len(rubric.dimensions)}"
        )
    pairs = rubric.subcriterion_pairs
    if len(pairs) != REQUIRED_SUBCRITERIA:
        raise RubricInvalid(
            f"rubric must have exactly {REQUIRED_SUBCRITERIA} subcriteria, got {len(pairs)}"
        )
    if len(set(pairs)) != len(pairs):
        raise RubricInvalid("duplicate (dimension, subcriterion) pair")
    for dim in rubric.dimensions:
        if not dim.name.strip():
            raise RubricInvalid("dimension with empty name")
        for sub in dim.subcriteria:
            if not sub.name.strip():
                raise RubricInvalid(f"empty subcriterion name under {dim.name}")
            expected = set(range(SCORE_MIN, SCORE_MAX + 1))
            present = set(sub.anchors)
            if present != expected:
                missing = sorted(expected - present)
                raise RubricInvalid(
                    f"{dim.name}/{sub.name} missing anchors for scores {missing}" if missing
                    else f"{dim.name}/{sub.name} has anchors outside 1..5"
                )
            if any(not text.strip() for text in sub.anchors.values()):
                raise RubricInvalid(f"{dim.name}/{sub.name} has an empty anchor text")
    return rubric


def rubric_from_dict(data: dict) -> Rubric:
    try:
        dimensions = tuple(
            Dimension(
                name=d["name"],
                subcriteria=tuple(
                    Subcriterion(name=s["name"], anchors={int(k): str(v) for k, v in s["anchors"].items()})
                    for s in d["subcriteria"]
                ),
            )
            for d in data["dimensions"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RubricInvalid(f"malformed rubric definition: {exc}") from exc
    return _validate(Rubric(dimensions))


def load_rubric(path: Path | str) -> Rubric:
    """Load and validate a rubric definition file (JSON)."""
    try:
        data = load_json(path)
    except Exception as exc:
        raise RubricInvalid(f"cannot parse rubric file {path}: {exc}") from exc
    return rubric_from_dict(data)


def builtin_rubric() -> Rubric:
    """The engine's default scoring instrument."""
    return rubric_from_dict(_BUILTIN)


_BUILTIN = {
    "dimensions": [
        {
            "name": "Scope",
            "subcriteria": [
                {"name": "Objectives", "anchors": {
                    "1": "No objectives stated or inferred",
                    "2": "Unclear or implicit; requires inference",
                    "3": "Vague or generic; lacks focus",
                    "4": "Clear in one section; lacks precision",
                    "5": "Clearly stated in abstract and intro; scoped and measurable",
                }},
                {"name": "Relevance", "anchors": {
                    "1": "Not relevant to the field",
                    "2": "Weak or outdated connection",
                    "3": "Partially related to broader topic",
                    "4": "Generally relevant, not urgent",
                    "5": "Directly aligns with high-impact trends",
                }},
                {"name": "Audience", "anchors": {
                    "1": "No discernible audience",
                    "2": "Confusing or poorly targeted",
                    "3": "Somewhat unclear",
                    "4": "Generally appropriate tone",
                    "5": "Clear academic or interdisciplinary targeting",
                }},
            ],
        },
        {
            "name": "Literature",
            "subcriteria": [
                {"name": "Comprehensiveness", "anchors": {
                    "1": "Sparse or incomplete coverage",
                    "2": "Major omissions",
                    "3": "Some omissions or limited domain",
                    "4": "Mostly complete with minor gaps",
                    "5": ">= 30 citations, across subfields, up-to-date",
                }},
                {"name": "Balance", "anchors": {
                    "1": "Highly biased or promotional",
                    "2": "One-sided view",
                    "3": "Somewhat unbalanced",
                    "4": "Balanced with minor bias",
                    "5": "Discusses strengths/weaknesses and perspectives",
                }},
                {"name": "Currency", "anchors": {
                    "1": "Ignores recent developments",
                    "2": "Mostly dated content",
                    "3": "Some outdated dominance",
                    "4": "Mostly recent with few older works",
                    "5": "Up-to-date including preprints and conferences",
                }},
            ],
        },
        {
            "name": "Analysis",
            "subcriteria": [
                {"name": "Depth", "anchors": {
                    "1": "No meaningful analysis",
                    "2": "Minimal or weak analysis",
                    "3": "Descriptive only",
                    "4": "Moderate depth",
                    "5": "Theoretical rigor, layered insight",
                }},
                {"name": "Integration", "anchors": {
                    "1": "Disjointed and fragmented",
                    "2": "Mostly disconnected ideas",
                    "3": "Partial, siloed integration",
                    "4": "Good integration",
                    "5": "Seamless integration of multiple perspectives",
                }},
                {"name": "Gaps", "anchors": {
                    "1": "Ignores all research gaps",
                    "2": "Barely addresses open questions",
                    "3": "Surface-level mention",
                    "4": "Mentions some gaps",
                    "5": "Clearly identifies open challenges",
                }},
            ],
        },
        {
            "name": "Originality",
            "subcriteria": [
                {"name": "Novelty", "anchors": {
                    "1": "No original contribution",
                    "2": "Mostly derivative",
                    "3": "Slightly original",
                    "4": "Novel combination of ideas",
                    "5": "New taxonomy, framework, or domain",
                }},
                {"name": "Advancement", "anchors": {
                    "1": "No advancement",
                    "2": "Minimal progress",
                    "3": "Incremental value",
                    "4": "Moderate contribution",
                    "5": "Strong guidance for future research",
                }},
                {"name": "Redundancy Avoidance", "anchors": {
                    "1": "Highly repetitive",
                    "2": "Largely redundant",
                    "3": "Moderate overlap",
                    "4": "Mostly unique",
                    "5": "Clearly distinct from prior surveys",
                }},
            ],
        },
        {
            "name": "Organization",
            "subcriteria": [
                {"name": "Logical Flow", "anchors": {
                    "1": "Chaotic and disorganized",
                    "2": "Poor transitions",
                    "3": "Basic structure with issues",
                    "4": "Mostly clear flow",
                    "5": "Excellent transitions and structure",
                }},
                {"name": "Section Clarity", "anchors": {
                    "1": "No clear structure",
                    "2": "Unclear or unlabeled",
                    "3": "Confusing or too long",
                    "4": "Mostly clear",
                    "5": "Well-labeled and crystal clear",
                }},
                {"name": "Summarization", "anchors": {
                    "1": "No summary or synthesis",
                    "2": "Almost none",
                    "3": "Minimal synthesis",
                    "4": "Some synthesis and structure",
                    "5": "Effective use of summaries and visuals",
                }},
            ],
        },
        {
            "name": "Presentation",
            "subcriteria": [
                {"name": "Language", "anchors": {
                    "1": "Unreadable or ungrammatical",
                    "2": "Poor grammar or clarity",
                    "3": "Clumsy tone",
                    "4": "Mostly well-written",
                    "5": "Clear academic language throughout",
                }},
                {"name": "Visuals", "anchors": {
                    "1": "No meaningful visuals",
                    "2": "Irrelevant or low-quality",
                    "3": "Basic, not integrated",
                    "4": "Good visuals with minor issues",
                    "5": "Strong figures/tables supporting content",
                }},
                {"name": "Formatting", "anchors": {
                    "1": "Disorganized formatting",
                    "2": "Distracting issues",
                    "3": "Inconsistent formatting",
                    "4": "Minor format problems",
                    "5": "Clean, consistent styles",
                }},
            ],
        },
        {
            "name": "References",
            "subcriteria": [
                {"name": "Accuracy", "anchors": {
                    "1": "Unreliable or incorrect citations",
                    "2": "Multiple citation errors",
                    "3": "Some mismatched or incomplete",
                    "4": "Minor format issues",
                    "5": "Accurate, traceable, properly formatted",
                }},
                {"name": "Appropriateness", "anchors": {
                    "1": "Poor citation quality",
                    "2": "Many low-quality sources",
                    "3": "Some irrelevant or filler",
                    "4": "Mostly appropriate",
                    "5": "Highly relevant, current and foundational",
                }},
            ],
        },
    ]
}
