from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arise.citations import (
    Citation,
    CitationStatus,
    CurationReport,
    dedupe_and_validate,
    retrieve_candidates,
)
from arise.errors import AllPairsFailed, NetworkError
from arise.resolve import HitSource, QueryKind, ResolverHit
from arise.topics import Source, SourceKind, SourcePlan


class FanOutResolver:
    """Returns ``hits_per_query`` synthetic hits; named sources can fail."""

    def __init__(self, hits_per_query=5, failing_sources=()):
        self.hits_per_query = hits_per_query
        self.failing_sources = set(failing_sources)
        self.seq = 0

    def resolve(self, query):
        assert query.kind is QueryKind.FreeSearch
        if query.payload.get("source") in self.failing_sources:
            raise NetworkError("synthetic outage")
        hits = []
        for i in range(self.hits_per_query):
            self.seq += 1
            hits.append(
                ResolverHit(
                    source=HitSource.Stub,
                    title=f"Unique Work {self.seq:04d} on {query.payload['query']}",
                    authors=[f"Author {self.seq}"],
                    venue="Venue",
                    year=2020,
                    match_score=1.0 - i * 0.01,
                )
            )
        return hits

    def fetch_document(self, url_or_id):
        raise NotImplementedError


def two_by_two_plan():
    sources = [Source(SourceKind.SearchIndex, "s1"), Source(SourceKind.PreprintRepo, "s2")]
    return SourcePlan(entries=[("topic a", list(sources)), ("topic b", list(sources))])


def test_fan_out_counts_and_provenance():
    outcome = retrieve_candidates(two_by_two_plan(), FanOutResolver(hits_per_query=5))
    assert len(outcome.candidates) == 20
    assert outcome.failures == []
    assert {c.provenance for c in outcome.candidates} == {
        ("topic a", "s1"),
        ("topic a", "s2"),
        ("topic b", "s1"),
        ("topic b", "s2"),
    }
    assert [c.ref_id for c in outcome.candidates] == [f"ref{i}" for i in range(1, 21)]


def test_partial_failure_recorded():
    outcome = retrieve_candidates(
        two_by_two_plan(), FanOutResolver(hits_per_query=5, failing_sources={"s2"})
    )
    assert len(outcome.candidates) == 10
    assert len(outcome.failures) == 2
    assert outcome.failures[0]["source"] == "s2"


def test_all_pairs_failed():
    with pytest.raises(AllPairsFailed):
        retrieve_candidates(
            two_by_two_plan(), FanOutResolver(failing_sources={"s1", "s2"})
        )


def test_empty_plan_rejected():
    with pytest.raises(ValueError):
        retrieve_candidates(SourcePlan(entries=[]), FanOutResolver())


PHRASES = [
    "Airfoil Dynamics in Turbulent Regimes",
    "Parsing Bibliographic Records at Scale",
    "Perceptual Color Spaces for Displays",
    "Droplet Coalescence on Soft Substrates",
    "Pruning Ensembles of Decision Forests",
    "Membrane Electrolysis for Fuel Cells",
    "Sparsity Patterns in Temporal Graphs",
    "Haptic Rendering of Deformable Bodies",
    "Ink Diffusion Models for Calligraphy",
    "Jet Quenching in Heavy-Ion Collisions",
    "Karst Aquifer Tracing with Isotopes",
    "Laser Cooling of Polyatomic Molecules",
    "Morphogenesis of Coral Reef Skeletons",
    "Neutrino Oscillation Detector Design",
    "Opportunistic Routing in Mesh Networks",
    "Photonic Crystals for Waveguide Filters",
    "Quantum Error Mitigation Protocols",
    "Rheology of Dense Granular Suspensions",
    "Saliency Estimation for Video Codecs",
    "Tactile Sensing Arrays for Prosthetics",
    "Ultrasound Elastography of Soft Tissue",
    "Viscoelastic Damping in Tall Buildings",
    "Wavelet Compression of Climate Fields",
    "Xylem Transport Under Drought Stress",
    "Yield Prediction from Canopy Spectra",
    "Zeolite Catalysis for Methanol Synthesis",
]


def make_citation(n, **overrides):
    fields = dict(
        ref_id=f"ref{n}",
        title=PHRASES[(n - 1) % len(PHRASES)],
        authors=[f"Author {n}"],
        venue="Venue",
        year=2020,
        provenance=("t", "s"),
    )
    fields.update(overrides)
    return Citation(**fields)


def test_exact_doi_dedup():
    a = make_citation(1, doi="10.1/x")
    b = make_citation(2, title="Completely Different Wording Here", doi="10.1/X")
    curated, report = dedupe_and_validate([a, b])
    assert len(curated) == 1
    assert report.deduplicated == 1
    assert report.to_dict()["curated"] == 1


def test_near_title_dedup():
    a = make_citation(1, title="Attention Is All You Need")
    b = make_citation(2, title="attention is all you need.")
    curated, report = dedupe_and_validate([a, b])
    assert len(curated) == 1
    assert report.deduplicated == 1


def test_merge_prefers_doi_and_fills_fields():
    a = make_citation(1, title="Shared Title Work", venue="", year=None, url="http://u")
    b = make_citation(2, title="Shared Title Work", doi="10.1/z", venue="Good Venue", year=2019)
    curated, _ = dedupe_and_validate([a, b])
    assert len(curated) == 1
    merged = curated[0]
    assert merged.doi == "10.1/z"
    assert merged.venue == "Good Venue"
    assert merged.url == "http://u"
    # Earliest provenance kept.
    assert merged.provenance == a.provenance


def test_malformed_dropped():
    bad_title = make_citation(1, title="   ")
    bad_year = make_citation(2, year=1666)
    no_authors = make_citation(3, authors=[])
    good = make_citation(4)
    curated, report = dedupe_and_validate([bad_title, bad_year, no_authors, good])
    assert [c.title for c in curated] == [good.title]
    assert report.malformed_dropped == 3
    assert report.retrieved == 4


def test_empty_input_is_total():
    curated, report = dedupe_and_validate([])
    assert curated == []
    assert report.retrieved == report.curated == 0


def test_renumbering_contiguous_and_status():
    citations = [make_citation(n) for n in (3, 9, 5)]
    curated, _ = dedupe_and_validate(citations)
    assert [c.ref_id for c in curated] == ["ref1", "ref2", "ref3"]
    assert all(c.status is CitationStatus.Curated for c in curated)


def test_report_arithmetic_enforced():
    with pytest.raises(ValueError):
        CurationReport(retrieved=5, deduplicated=1, malformed_dropped=1, curated=5)


@st.composite
def candidate_lists(draw):
    n = draw(st.integers(min_value=0, max_value=25))
    citations = []
    for i in range(n):
        kind = draw(st.integers(min_value=0, max_value=3))
        if kind == 0:
            citations.append(make_citation(i + 1, title=""))
        elif kind == 1 and citations:
            # Duplicate of an earlier title.
            source = draw(st.integers(min_value=0, max_value=len(citations) - 1))
            citations.append(make_citation(i + 1, title=citations[source].title.upper()))
        else:
            citations.append(make_citation(i + 1))
    return citations


@given(candidate_lists())
@settings(max_examples=60, deadline=None)
def test_property_contiguous_ids_and_idempotence(candidates):
    curated, report = dedupe_and_validate(candidates)
    assert [c.ref_id for c in curated] == [f"ref{i}" for i in range(1, len(curated) + 1)]
    assert report.curated == len(curated)
    again, report2 = dedupe_and_validate([Citation.from_dict(c.to_dict()) for c in curated])
    assert [c.to_dict() for c in again] == [c.to_dict() for c in curated]
    assert report2.deduplicated == 0
    assert report2.malformed_dropped == 0


@given(candidate_lists())
@settings(max_examples=60, deadline=None)
def test_property_no_curated_near_duplicates(candidates):
    from arise.citations import _near_duplicate

    curated, _ = dedupe_and_validate(candidates)
    for i in range(len(curated)):
        for j in range(i + 1, len(curated)):
            assert not _near_duplicate(curated[i], curated[j])


def test_dedup_stable_under_shuffle_of_group_payload():
    from arise.resolve import normalize_title

    rng = random.Random(5)
    base = [make_citation(n) for n in range(1, 8)]
    base.append(make_citation(8, title=base[0].title + "."))
    curated, _ = dedupe_and_validate(base)
    titles = {normalize_title(c.title) for c in curated}
    rng.shuffle(base)
    # Renumber to mimic a different retrieval order.
    for i, c in enumerate(base, start=1):
        c.ref_id = f"ref{i}"
    curated2, _ = dedupe_and_validate(base)
    assert {normalize_title(c.title) for c in curated2} == titles
