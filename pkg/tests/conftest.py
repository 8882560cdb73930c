from __future__ import annotations

import pytest

from arise.resolve import StubResolver

CORPUS = [
    {
        "doi": "10.1000/alpha.2023",
        "title": "Attention Is All You Need",
        "authors": ["Ashish Vaswani", "Noam Shazeer"],
        "venue": "NeurIPS",
        "year": 2017,
        "url": "https://fixture.example/alpha",
        "text": "Full text of the attention paper. " * 40,
    },
    {
        "doi": "10.1000/beta.2024",
        "title": "Retrieval-Augmented Generation for Knowledge-Intensive Tasks",
        "authors": ["Patrick Lewis"],
        "venue": "NeurIPS",
        "year": 2020,
        "url": "https://fixture.example/beta",
        "abstract": "Abstract-only fixture describing retrieval augmentation. " * 10,
    },
    {
        "title": "Survey Quality Rubrics for Automated Evaluation",
        "authors": ["Ada Reviewer"],
        "venue": "ACL",
        "year": 2024,
        "url": "https://fixture.example/gamma",
        "paywalled": True,
    },
    {
        "doi": "10.1000/delta.2025",
        "title": "Zwölf Bäume: Über die Ökologie der Wälder",
        "authors": ["Jörg Müller"],
        "venue": "Ecology Letters",
        "year": 2021,
        "url": "https://fixture.example/delta",
        "intro": "Introduction-only fixture text about forests. " * 12,
    },
]


@pytest.fixture
def stub_resolver():
    return StubResolver(CORPUS)
