#!/usr/bin/env python3
"""Regenerate the committed scripted demo fixture (fixtures/demo_run).

The fixture drives a full offline pipeline run over a 15-citation corpus:
    arise run --topic "agentic systems for automated survey generation" \
        --scripted fixtures/demo_run --non-interactive --run-root /tmp/run
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from arise.rubric import builtin_rubric
from arise.scripting import build_run_script, write_fixture

SUBTOPICS = [
    "multi-agent orchestration for scholarly writing",
    "retrieval and curation of bibliographic metadata",
    "rubric-based evaluation of generated documents",
    "iterative refinement loops with reviewer feedback",
    "citation integrity and traceability auditing",
]

TITLES = [
    "Coordinating Specialized Agents for Long-Form Scholarly Writing",
    "Curating Bibliographic Metadata from Heterogeneous Scholarly Sources",
    "Behaviorally Anchored Rubrics for Automated Document Evaluation",
    "Feedback Loops that Improve Machine-Written Technical Prose",
    "Tracing Generated Citations back to Bibliographic Databases",
    "Deduplicating Near-Identical Records in Citation Pipelines",
    "Key-Value Evidence Memories for Grounded Text Generation",
    "Outline Construction Strategies for Automated Surveys",
    "Section-Scoped Prompting and Evidence Isolation in Drafting Systems",
    "Editor Agents and the Preservation of Citation Structure",
    "Reviewer Ensembles and Score Aggregation for Quality Control",
    "Revision Planning from Structured Reviewer Feedback",
    "Formatting Pipelines from Draft Text to Venue-Ready Manuscripts",
    "Threshold Policies for Accepting Machine-Generated Documents",
    "Benchmarks and Audits for Automated Literature Synthesis",
]


def make_corpus() -> list[dict]:
    corpus = []
    for i, title in enumerate(TITLES, start=1):
        corpus.append(
            {
                "doi": f"10.5555/demo.{i:02d}",
                "title": title,
                "authors": [f"Researcher {chr(64 + i)}", "Collaborator B"],
                "venue": "Journal of Automated Scholarship" if i % 2 else "Proceedings of Agentic Systems",
                "year": 2019 + (i % 7),
                "url": f"https://corpus.demo/paper/{i:02d}",
                "text": (
                    f"{title}. This paper develops its approach in detail, describes "
                    "the system architecture, evaluation protocol, and reports results "
                    "against strong baselines. " * 6
                ),
            }
        )
    return corpus


def main() -> None:
    out = Path(__file__).resolve().parent.parent / "fixtures" / "demo_run"
    corpus = make_corpus()
    script = build_run_script(corpus, SUBTOPICS, builtin_rubric(), batch_size=8)
    write_fixture(out, corpus, script)
    print(f"wrote fixture with {len(script)} script entries to {out}")


if __name__ == "__main__":
    main()
