"""Agent roster: prompt templates and output schemas for every LLM role.

Role mapping
------------
LLM-templated roles (bound to the gateway):
    topic_expansion     proposes subtopics around the survey seed
    domain_scoping      maps approved subtopics to source venues
    source_summarizer   contribution-focused summary of one source
    outline_writer      partial outline for one mini-batch of summaries
    outline_merger      pairwise outline merge
    outline_validator   advisory coherence check after each merge
    section_writer      drafts one section from key-scoped evidence
    section_editor      flow/clarity pass that must preserve citations
    section_reviser     evidence-locked revision of one targeted section
    reviewer            rubric scoring of one chunk
    meta_reviewer       synthesizes reviews into a revision plan
    title_generator     manuscript title from the full draft
    abstract_generator  manuscript abstract from the full draft

Deterministic roles (no prompt; see the owning module):
    citation retrieval and completion run through the resolver clients
    (resolve.py, bibtex.py); citation-command and environment hygiene is a
    pure text transform (latexfmt.py).

Reviewers, validators, and formatters run at temperature 0; writer roles
default to WRITER_TEMPERATURE.
"""

from __future__ import annotations

from .gateway import Registry

WRITER_TEMPERATURE = 0.7

_OUTLINE_NODE_DEFS = {
    "node": {
        "type": "object",
        "properties": {
            "title": {"type": "string", "minLength": 1},
            "cite_keys": {"type": "array", "items": {"type": "string"}},
            "children": {"type": "array", "items": {"$ref": "#/$defs/node"}},
        },
        "required": ["title", "cite_keys"],
        "additionalProperties": False,
    }
}

SCHEMAS: dict[str, dict] = {
    "topic_list": {
        "type": "object",
        "properties": {
            "subtopics": {"type": "array", "items": {"type": "string", "minLength": 1}, "minItems": 1}
        },
        "required": ["subtopics"],
        "additionalProperties": False,
    },
    "source_plan": {
        "type": "object",
        "properties": {
            "entries": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "subtopic": {"type": "string"},
                        "sources": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "properties": {
                                    "kind": {
                                        "type": "string",
                                        "enum": ["publisher_portal", "search_index", "preprint_repo"],
                                    },
                                    "name": {"type": "string", "minLength": 1},
                                },
                                "required": ["kind", "name"],
                                "additionalProperties": False,
                            },
                        },
                    },
                    "required": ["subtopic", "sources"],
                    "additionalProperties": False,
                },
            }
        },
        "required": ["entries"],
        "additionalProperties": False,
    },
    "summary": {
        "type": "object",
        "properties": {"summary": {"type": "string", "minLength": 1}},
        "required": ["summary"],
        "additionalProperties": False,
    },
    "outline": {
        "$defs": _OUTLINE_NODE_DEFS,
        "type": "object",
        "properties": {
            "sections": {"type": "array", "items": {"$ref": "#/$defs/node"}, "minItems": 1}
        },
        "required": ["sections"],
        "additionalProperties": False,
    },
    "outline_validation": {
        "type": "object",
        "properties": {
            "coherent": {"type": "boolean"},
            "issues": {"type": "array", "items": {"type": "string"}},
        },
        "required": ["coherent", "issues"],
        "additionalProperties": False,
    },
    "section_body": {
        "type": "object",
        "properties": {"body": {"type": "string", "minLength": 1}},
        "required": ["body"],
        "additionalProperties": False,
    },
    "review": {
        "type": "object",
        "properties": {
            "subscores": {
                "type": "object",
                "additionalProperties": {
                    "type": "object",
                    "additionalProperties": {"type": "integer", "minimum": 1, "maximum": 5},
                },
            },
            "comments": {"type": "object", "additionalProperties": {"type": "string"}},
            "suggestions": {"type": "array", "items": {"type": "string"}},
            "summary": {"type": "string"},
            "strengths": {"type": "string"},
            "weaknesses": {"type": "string"},
            "decision": {
                "type": "string",
                "enum": ["accept", "minor revision", "major revision", "reject"],
            },
        },
        "required": ["subscores", "comments", "suggestions", "summary", "strengths", "weaknesses", "decision"],
        "additionalProperties": False,
    },
    "revision_plan": {
        "type": "object",
        "properties": {
            "items": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "target_section": {"type": "string"},
                        "issue": {"type": "string", "minLength": 1},
                        "sources": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "properties": {
                                    "reviewer": {"type": "string"},
                                    "chunk_index": {"type": "integer", "minimum": 0},
                                },
                                "required": ["reviewer", "chunk_index"],
                                "additionalProperties": False,
                            },
                        },
                    },
                    "required": ["target_section", "issue", "sources"],
                    "additionalProperties": False,
                },
            }
        },
        "required": ["items"],
        "additionalProperties": False,
    },
    "title": {
        "type": "object",
        "properties": {"title": {"type": "string", "minLength": 1}},
        "required": ["title"],
        "additionalProperties": False,
    },
    "abstract": {
        "type": "object",
        "properties": {"abstract": {"type": "string", "minLength": 1}},
        "required": ["abstract"],
        "additionalProperties": False,
    },
}

TEMPLATES: dict[str, str] = {
    "topic_expansion": """You are scoping an academic survey.

Survey theme: {{ seed }}

Propose between 5 and 15 semantically related subtopics that together give
the survey thematic breadth while staying on topic. Each subtopic should be
a short noun phrase a researcher would recognize. Avoid duplicates and
avoid restating the theme verbatim.""",
    "domain_scoping": """You are selecting literature sources for an academic survey.

Approved subtopics:
{{ subtopics }}

For each subtopic, list the source venues that are topically appropriate.
Allowed source kinds: publisher_portal (e.g. IEEE Xplore, ScienceDirect),
search_index (e.g. Crossref, Semantic Scholar, Google Scholar),
preprint_repo (e.g. arXiv). Sources filter the *field* only; do not rank by
prestige, and do not include venues from obviously unrelated disciplines.""",
    "source_summarizer": """Summarize one source for a survey knowledge base.

Citation key: {{ ref_id }}
Title: {{ title }}
Authors: {{ authors }}

Source text:
{{ text }}

Write a concise, contribution-focused summary of 80 to 250 words: what the
work does, how, and what it found. Do not mention any citation key other
than {{ ref_id }}, and do not invent content absent from the text.""",
    "outline_writer": """You are building part of the outline of an academic survey.

Knowledge-base entries for this batch (key: summary):
{{ batch }}

Generate a partial outline with sections and subsections covering these
entries. Every entry key listed above must appear in the cite_keys of at
least one node. Use descriptive titles; nest subsections under sections via
"children". Do not cite keys that are not in this batch.""",
    "outline_merger": """Merge two partial survey outlines into one coherent outline.

Outline A:
{{ left }}

Outline B:
{{ right }}

Combine overlapping themes, order sections logically, and keep every
citation key from both inputs: the merged outline's citation keys must be
exactly the union of the two inputs' keys. Do not invent new keys.""",
    "outline_validator": """Check a merged survey outline for structural quality.

Outline:
{{ outline }}

Report whether the outline is coherent and well organized (no obvious
redundancies, no gaps in narrative order). List concrete issues if any.""",
    "section_writer": """Write one section of an academic survey.

Full outline skeleton (context only):
{{ skeleton }}

Section to write: {{ heading }} (level {{ level }})

Evidence (citation key: summary) - the ONLY sources you may cite:
{{ evidence }}

Write coherent, thematically organized scholarly prose for this section.
Cite evidence inline with bracketed numeric keys like [{{ example_key }}]
(the number is the citation key's index). Every evidence key must be cited
at least once; never cite a key that is not listed above. Anchor every
claim in the cited works.""",
    "section_editor": """Edit a survey section for flow and clarity.

Preceding context (do not edit):
{{ prev_tail }}

Section text:
{{ body }}

Improve logical flow and clarity, resolve local redundancies, and insert
%%TABLE-PLACEHOLDER%% or %%FIGURE-PLACEHOLDER%% where a table or figure
would help. Keep every citation exactly as cited: do not add, remove, or
renumber citations.""",
    "section_reviser": """Revise one section of a survey draft to address reviewer feedback.

Section: {{ heading }}

Current text:
{{ body }}

Issues to address:
{{ issues }}

Evidence (citation key: summary) - the ONLY sources you may cite:
{{ evidence }}

Rewrite the section to resolve the issues. Ground every new statement in
the evidence above; do not introduce citations outside it, and do not
change the section's topic.""",
    "reviewer": """You are an independent peer reviewer scoring part of a survey
manuscript against a fixed rubric.

Reviewer identity: {{ reviewer }}

Manuscript chunk {{ chunk_index }} (pages {{ page_range }}):
{{ chunk_text }}

Rubric (score every subcriterion from 1 to 5 using these anchors):
{{ rubric_block }}

Score ALL subcriteria, one integer each. Provide a short comment per
dimension, concrete improvement suggestions (name the section each one
targets), a summary, major strengths, major weaknesses, and an overall
decision (accept / minor revision / major revision / reject).""",
    "meta_reviewer": """You are the meta-reviewer synthesizing independent reviews of a
survey draft into one actionable revision plan.

Draft sections:
{{ section_list }}

Reviewer feedback:
{{ reviews_digest }}

Produce a deduplicated list of revision items. Each item names the section
to change (by its id from the list above), states the issue concretely,
and lists which (reviewer, chunk) observations support it. Merge items
that target the same section with the same underlying issue.""",
    "title_generator": """Propose the final title for this survey manuscript.

Draft digest:
{{ draft_digest }}

Return a single, specific, venue-ready title. No quotes, no subtitle
unless it adds information.""",
    "abstract_generator": """Write the abstract for this survey manuscript.

Draft digest:
{{ draft_digest }}

Return one paragraph of 120 to 250 words covering motivation, scope,
method of synthesis, and principal findings. No citations in the abstract.""",
}

TEMPLATE_SCHEMA: dict[str, str] = {
    "topic_expansion": "topic_list",
    "domain_scoping": "source_plan",
    "source_summarizer": "summary",
    "outline_writer": "outline",
    "outline_merger": "outline",
    "outline_validator": "outline_validation",
    "section_writer": "section_body",
    "section_editor": "section_body",
    "section_reviser": "section_body",
    "reviewer": "review",
    "meta_reviewer": "revision_plan",
    "title_generator": "title",
    "abstract_generator": "abstract",
}


def default_registry() -> Registry:
    registry = Registry()
    for template_id, text in TEMPLATES.items():
        registry.add_template(template_id, text)
    for schema_id, schema in SCHEMAS.items():
        registry.add_schema(schema_id, schema)
    return registry
