from __future__ import annotations

import pytest

from arise.agents import default_registry
from arise.compose import (
    Draft,
    Section,
    assemble,
    draft_section,
    edit_section,
    extract_cite_keys,
    outline_sections,
    render_plaintext,
    strip_keys,
)
from arise.errors import MissingSection
from arise.gateway import Gateway, script_provider
from arise.kb import CkmEntry, CkmStore
from arise.outline import Outline, OutlineNode
from arise.resolve import ContentStatus


def gw(*responses):
    return Gateway(script_provider(list(responses)), default_registry())


def node(title, keys=(), children=(), level=1):
    return OutlineNode(title=title, level=level, cite_keys=set(keys), children=list(children))


def store_with(*numbers):
    store = CkmStore()
    for n in numbers:
        store.insert(CkmEntry(f"ref{n}", f"Summary body {n}.", ContentStatus.Full, 3))
    store.freeze()
    return store


class TestCiteKeyScanning:
    def test_bracket_and_latex_forms(self):
        text = "Seen in [1] and [2, 7], confirmed by \\cite{ref9} and \\cite{ref3,ref4}."
        assert extract_cite_keys(text) == {"ref1", "ref2", "ref7", "ref9", "ref3", "ref4"}

    def test_strip_keys_removes_only_targets(self):
        text = "Claims [1][2, 3] and \\cite{ref4,ref5}."
        out = strip_keys(text, {"ref2", "ref4"})
        assert extract_cite_keys(out) == {"ref1", "ref3", "ref5"}


class TestDraftSection:
    def evidence(self):
        return {"ref1": "First summary.", "ref2": "Second summary."}

    def test_accepts_body_citing_all(self):
        body, flags = draft_section(
            node("Background", ["ref1", "ref2"]),
            self.evidence(),
            gw(("section_writer", {"body": "Work [1] extends [2]."})),
        )
        assert extract_cite_keys(body) == {"ref1", "ref2"}
        assert flags == []

    def test_foreign_key_stripped_after_reprompt(self):
        bad = {"body": "Work [1] and [2] plus rogue [7]."}
        body, flags = draft_section(
            node("Background", ["ref1", "ref2"]),
            self.evidence(),
            gw(("section_writer", bad), ("section_writer", bad)),
        )
        assert "ref7" not in extract_cite_keys(body)
        assert extract_cite_keys(body) == {"ref1", "ref2"}
        assert "stripped_foreign_keys" in flags

    def test_missing_key_appended_after_reprompt(self):
        partial = {"body": "Only cites [1]."}
        body, flags = draft_section(
            node("Background", ["ref1", "ref2"]),
            self.evidence(),
            gw(("section_writer", partial), ("section_writer", partial)),
        )
        assert extract_cite_keys(body) == {"ref1", "ref2"}
        assert "appended_missing_keys" in flags

    def test_structural_node_allows_zero_citations(self):
        body, flags = draft_section(
            node("Introduction"),
            {},
            gw(("section_writer", {"body": "An uncited overview paragraph."})),
        )
        assert extract_cite_keys(body) == set()
        assert flags == []


class TestEditSection:
    def test_preserving_edit_accepted(self):
        edited, reverted = edit_section(
            "Original [1] text.", gw(("section_editor", {"body": "Polished [1] text."}))
        )
        assert edited == "Polished [1] text."
        assert not reverted

    def test_key_dropping_edit_reverted(self):
        edited, reverted = edit_section(
            "Original [1] and [2].", gw(("section_editor", {"body": "Polished [1] only."}))
        )
        assert edited == "Original [1] and [2]."
        assert reverted

    def test_identity_edit_accepted(self):
        edited, reverted = edit_section(
            "Same [1] text.", gw(("section_editor", {"body": "Same [1] text."}))
        )
        assert edited == "Same [1] text."
        assert not reverted


class TestAssemble:
    def outline(self):
        return Outline(
            nodes=[
                node("Introduction"),
                node("Methods", ["ref1"], children=[node("Details", ["ref2"], level=2)]),
                node("Conclusion", ["ref3"]),
            ]
        )

    def test_sections_in_preorder(self):
        numbered = outline_sections(self.outline())
        assert [sid for sid, _n in numbered] == ["1", "2", "2.1", "3"]

    def test_assemble_six_bodies(self):
        bodies = {
            "1": ("Intro text.", []),
            "2": ("Methods cite [1].", []),
            "2.1": ("Details cite [2].", []),
            "3": ("Conclusion cites [3].", []),
        }
        draft = assemble(
            self.outline(),
            bodies,
            gw(
                ("title_generator", {"title": "A Survey"}),
                ("abstract_generator", {"abstract": "We survey things."}),
            ),
            store_with(1, 2, 3),
        )
        assert [s.section_id for s in draft.sections] == ["1", "2", "2.1", "3"]
        assert draft.title == "A Survey"
        assert draft.cite() == {"ref1", "ref2", "ref3"}

    def test_missing_body_raises(self):
        bodies = {"2": ("Methods cite [1].", []), "2.1": ("Details cite [2].", [])}
        with pytest.raises(MissingSection) as err:
            assemble(self.outline(), bodies, gw((None, "{}")), store_with(1, 2, 3))
        assert "3" in err.value.node_ids

    def test_coverage_check_on_thirty_keys(self):
        keys = list(range(1, 31))
        outline = Outline(nodes=[node(f"Part {n}", [f"ref{n}"]) for n in keys])
        bodies = {str(i): (f"Text citing [{n}].", []) for i, n in enumerate(keys, start=1)}
        draft = assemble(
            outline,
            bodies,
            gw(
                ("title_generator", {"title": "T"}),
                ("abstract_generator", {"abstract": "A"}),
            ),
            store_with(*keys),
        )
        # Brute-force union over section bodies equals the outline key union.
        union = set()
        for section in draft.sections:
            union |= extract_cite_keys(section.body)
        assert union == {f"ref{n}" for n in keys}

    def test_error_list_keys_excluded_from_lock_sets(self):
        outline = Outline(nodes=[node("Only", ["ref1", "ref9"])])
        bodies = {"1": ("Cites [1].", [])}
        draft = assemble(
            outline,
            bodies,
            gw(
                ("title_generator", {"title": "T"}),
                ("abstract_generator", {"abstract": "A"}),
            ),
            store_with(1),  # ref9 unavailable
        )
        assert draft.sections[0].cite_keys == {"ref1"}


def test_draft_roundtrip_and_plaintext():
    draft = Draft(
        sections=[Section("1", "Heading", 1, "Body [1].", {"ref1"})],
        title="T",
        abstract="A",
    )
    clone = Draft.from_dict(draft.to_dict())
    assert clone.to_dict() == draft.to_dict()
    text = render_plaintext(draft)
    assert "# Heading" in text and "Body [1]." in text
