from __future__ import annotations

import pytest

from arise.agents import default_registry
from arise.citations import Citation, CitationStatus
from arise.gateway import Gateway, script_provider
from arise.kb import CkmEntry, CkmStore, ErrorList, build_kb, summarize_source
from arise.resolve import ContentStatus, StubResolver


def curated(n, title, url=None, **extra):
    return Citation(
        ref_id=f"ref{n}",
        title=title,
        authors=[f"Writer {n}"],
        venue="V",
        year=2021,
        url=url,
        status=CitationStatus.Curated,
        **extra,
    )


def words(n, stem="evidence"):
    return " ".join(f"{stem}{i}" for i in range(n))


def summary_response(n_words=120):
    return {"summary": "This work contributes a method. " + words(n_words - 5)}


def gateway_for(*responses):
    return Gateway(script_provider(list(responses)), default_registry())


def test_build_partitions_keys(stub_resolver):
    citations = [
        curated(1, "Attention Is All You Need", url="https://fixture.example/alpha"),
        curated(2, "Retrieval-Augmented Generation for Knowledge-Intensive Tasks", url="https://fixture.example/beta"),
        curated(3, "Ghost Paper That Does Not Resolve", url="https://fixture.example/missing"),
    ]
    gw = gateway_for(
        ("source_summarizer", summary_response()),
        ("source_summarizer", summary_response()),
    )
    store, errors = build_kb(citations, stub_resolver, gw)
    assert store.keys() == {"ref1", "ref2"}
    assert errors.keys() == {"ref3"}
    assert store.entry("ref1").source_kind is ContentStatus.Full
    assert store.entry("ref2").source_kind is ContentStatus.AbstractOnly
    # The dead-link citation records its whole failure chain.
    (entry,) = errors.entries
    assert len(entry["attempts"]) >= 1


def test_fallback_search_recovers_dead_url(stub_resolver):
    # URL 404s, but the title matches a corpus record with readable content.
    citation = curated(1, "Retrieval-Augmented Generation for Knowledge-Intensive Tasks", url="https://fixture.example/dead")
    gw = gateway_for(("source_summarizer", summary_response()))
    store, errors = build_kb([citation], stub_resolver, gw)
    assert store.keys() == {"ref1"}
    assert errors.entries == []


def test_empty_citation_list(stub_resolver):
    gw = gateway_for((None, "{}"))
    store, errors = build_kb([], stub_resolver, gw)
    assert len(store) == 0
    assert errors.entries == []


def test_paywalled_without_fallback_lands_in_errors(stub_resolver):
    citation = curated(1, "Survey Quality Rubrics for Automated Evaluation", url="https://fixture.example/gamma")
    gw = gateway_for((None, "{}"))
    store, errors = build_kb([citation], stub_resolver, gw)
    assert store.keys() == set()
    assert errors.keys() == {"ref1"}
    kinds = [a["error"] for a in errors.entries[0]["attempts"]]
    assert "PaywalledError" in kinds


def test_shared_summary_for_identical_text(stub_resolver):
    citations = [
        curated(1, "Attention Is All You Need", url="https://fixture.example/alpha"),
        curated(2, "Attention Is All You Need V2", url="https://fixture.example/alpha"),
    ]
    gw = gateway_for(("source_summarizer", summary_response()))
    store, _ = build_kb(citations, stub_resolver, gw)
    assert store.entry("ref1").summary == store.entry("ref2").summary
    assert "shared_summary_body" in store.entry("ref2").flags


def test_summarize_accepts_in_band():
    gw = gateway_for(("source_summarizer", summary_response(120)))
    summary, flags = summarize_source("text", curated(1, "T"), gw)
    assert len(summary.split()) == 120
    assert flags == []


def test_summarize_reprompts_then_accepts():
    gw = gateway_for(
        ("source_summarizer", summary_response(600)),
        ("source_summarizer", summary_response(150)),
    )
    summary, flags = summarize_source("text", curated(1, "T"), gw)
    assert len(summary.split()) == 150
    assert flags == []


def test_summarize_truncates_after_second_overflow():
    gw = gateway_for(
        ("source_summarizer", summary_response(600)),
        ("source_summarizer", summary_response(400)),
    )
    summary, flags = summarize_source("text", curated(1, "T"), gw)
    assert len(summary.split()) == 250
    assert "truncated" in flags


def test_summarize_scrubs_foreign_keys():
    tainted = {"summary": "Mentions ref9 wrongly. " + words(120)}
    gw = gateway_for(
        ("source_summarizer", tainted),
        ("source_summarizer", tainted),
    )
    summary, flags = summarize_source("text", curated(1, "T"), gw)
    assert "ref9" not in summary
    assert "scrubbed_foreign_keys" in flags


def test_query_scoped_ordered_and_missing():
    store = CkmStore()
    for n in (5, 2, 9):
        store.insert(CkmEntry(f"ref{n}", f"summary {n}", ContentStatus.Full, 2))
    store.freeze()
    found, missing = store.query({"ref9", "ref2", "ref999"})
    assert list(found) == ["ref2", "ref9"]
    assert missing == {"ref999"}
    found_empty, missing_empty = store.query(set())
    assert found_empty == {} and missing_empty == set()


def test_query_union_monotonicity():
    store = CkmStore()
    for n in range(1, 8):
        store.insert(CkmEntry(f"ref{n}", f"summary {n}", ContentStatus.Full, 2))
    store.freeze()
    k1 = {"ref1", "ref3"}
    k2 = {"ref5", "ref6"}
    joint, _ = store.query(k1 | k2)
    left, _ = store.query(k1)
    right, _ = store.query(k2)
    assert joint == {**left, **right}


def test_store_roundtrip_and_freeze():
    store = CkmStore()
    store.insert(CkmEntry("ref1", "s", ContentStatus.IntroOnly, 1, flags=["short"]))
    store.freeze()
    with pytest.raises(RuntimeError):
        store.insert(CkmEntry("ref2", "s", ContentStatus.Full, 1))
    clone = CkmStore.from_dict(store.to_dict())
    assert clone.to_dict() == store.to_dict()


def test_error_list_requires_attempts():
    errors = ErrorList()
    with pytest.raises(ValueError):
        errors.add("ref1", [])


def test_no_ckm_summary_references_foreign_key(stub_resolver):
    citations = [
        curated(1, "Attention Is All You Need", url="https://fixture.example/alpha"),
        curated(2, "Retrieval-Augmented Generation for Knowledge-Intensive Tasks", url="https://fixture.example/beta"),
    ]
    gw = gateway_for(
        ("source_summarizer", summary_response()),
        ("source_summarizer", summary_response()),
    )
    store, _ = build_kb(citations, stub_resolver, gw)
    for entry in store.entries():
        import re

        foreign = set(re.findall(r"\bref\d+\b", entry.summary)) - {entry.ref_id}
        assert not foreign
