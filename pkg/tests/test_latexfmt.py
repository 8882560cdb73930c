from __future__ import annotations

import pytest

from arise.bibtex import BibEntry
from arise.compose import Draft, Section
from arise.errors import MissingBibKey, TemplateUnknown
from arise.latexfmt import (
    escape_prose,
    get_template,
    lint_manuscript,
    normalize_latex,
    render_manuscript,
)


def bib(*numbers):
    return [
        BibEntry(
            key=f"ref{n}",
            entry_type="misc",
            fields={"title": f"Work {n}", "url": f"http://w/{n}"},
        )
        for n in numbers
    ]


# 50-case normalization corpus: (input, expected) with ref1..ref5 known.
CASES = [
    ("as shown in [1][2]", "as shown in \\cite{ref1,ref2}"),
    ("as shown in [1]", "as shown in \\cite{ref1}"),
    ("pair [1, 2] cited", "pair \\cite{ref1,ref2} cited"),
    ("triple [1][2][3]", "triple \\cite{ref1,ref2,ref3}"),
    ("mixed [1, 2][3]", "mixed \\cite{ref1,ref2,ref3}"),
    ("spaced [1 , 2]", "spaced \\cite{ref1,ref2}"),
    ("dup [1][1]", "dup \\cite{ref1}"),
    ("dup inline [2, 2]", "dup inline \\cite{ref2}"),
    ("ordered [3][1]", "ordered \\cite{ref3,ref1}"),
    ("tail [4]", "tail \\cite{ref4}"),
    ("[5] leads", "\\cite{ref5} leads"),
    ("a[1]b", "a\\cite{ref1}b"),
    ("two runs [1] and [2]", "two runs \\cite{ref1} and \\cite{ref2}"),
    ("sentence [1]. Next [2].", "sentence \\cite{ref1}. Next \\cite{ref2}."),
    ("parens ([1])", "parens (\\cite{ref1})"),
    ("comma [1], then", "comma \\cite{ref1}, then"),
    ("all five [1,2,3,4,5]", "all five \\cite{ref1,ref2,ref3,ref4,ref5}"),
    ("already \\cite{ref1}", "already \\cite{ref1}"),
    ("mixed cite \\cite{ref1} and [2]", "mixed cite \\cite{ref1} and \\cite{ref2}"),
    ("[99] unknown", "[99] unknown"),
    ("[1][99] partial unknown", "[1][99] partial unknown"),
    ("[12, 99]", "[12, 99]"),
    ("no cites here", "no cites here"),
    ("empty [] brackets", "empty [] brackets"),
    ("not numeric [a]", "not numeric [a]"),
    ("negative [-1]", "negative [-1]"),
    ("%%TABLE-PLACEHOLDER%%", "% placeholder: table to be supplied"),
    ("%%FIGURE-PLACEHOLDER%%", "% placeholder: figure to be supplied"),
    ("pre %%TABLE-PLACEHOLDER%% post", "pre % placeholder: table to be supplied post"),
    ("# Top Heading", "\\section{Top Heading}"),
    ("## Sub Heading", "\\subsection{Sub Heading}"),
    ("### Deep Heading", "\\subsubsection{Deep Heading}"),
    ("#### Deepest", "\\paragraph{Deepest}"),
    ("\\section{Kept}", "\\section{Kept}"),
    ("\\begin{table}[h]", "\\begin{table}[t]"),
    ("\\begin{table}", "\\begin{table}[t]"),
    ("\\begin{table}[t]", "\\begin{table}[t]"),
    ("```\ncode\n```", "\ncode\n"),
    ("```json\n{}\n```", "\n{}\n"),
    ("keep `inline` ticks", "keep `inline` ticks"),
    ("multi [1] with %%FIGURE-PLACEHOLDER%%", "multi \\cite{ref1} with % placeholder: figure to be supplied"),
    ("[2]\n[3]", "\\cite{ref2}\n\\cite{ref3}"),
    ("## Heading with [1]", "\\subsection{Heading with \\cite{ref1}}"),
    ("tight[1,2]join", "tight\\cite{ref1,ref2}join"),
    ("[1][2][99]", "[1][2][99]"),
    ("year like (2023) untouched", "year like (2023) untouched"),
    ("list items [1]; [2]; [3]", "list items \\cite{ref1}; \\cite{ref2}; \\cite{ref3}"),
    ("unicode Ünïcode [1]", "unicode Ünïcode \\cite{ref1}"),
    ("trailing space [1] ", "trailing space \\cite{ref1} "),
    ("[4,5] start and end [1]", "\\cite{ref4,ref5} start and end \\cite{ref1}"),
]


class TestNormalizationCorpus:
    @pytest.mark.parametrize("source,expected", CASES, ids=range(len(CASES)))
    def test_case_byte_exact(self, source, expected):
        out, _report = normalize_latex(source, bib(1, 2, 3, 4, 5, 12))
        assert out == expected

    @pytest.mark.parametrize("source,expected", CASES, ids=range(len(CASES)))
    def test_idempotent_on_corpus(self, source, expected):
        entries = bib(1, 2, 3, 4, 5, 12)
        once, _ = normalize_latex(source, entries)
        twice, _ = normalize_latex(once, entries)
        assert twice == once

    def test_corpus_has_fifty_cases(self):
        assert len(CASES) == 50


class TestReports:
    def test_unknown_numbers_reported(self):
        _out, report = normalize_latex("[99] and [1][98]", bib(1))
        assert report.unresolved_keys == {98, 99}
        assert report.citations_normalized == 0

    def test_counts(self):
        source = "# H\n[1][2] %%TABLE-PLACEHOLDER%%\n\\begin{table}[h]x\\end{table}"
        _out, report = normalize_latex(source, bib(1, 2))
        assert report.citations_normalized == 1
        assert report.environments_fixed == 2  # heading + table placement
        assert report.artifacts_removed == 1

    def test_key_set_preserved(self):
        source = "[1] [2, 3] [99]"
        out, report = normalize_latex(source, bib(1, 2, 3))
        from arise.compose import extract_cite_keys

        before = {"ref1", "ref2", "ref3", "ref99"}
        after = extract_cite_keys(out)
        assert after | {f"ref{n}" for n in report.unresolved_keys} == before


class TestTemplatesAndRender:
    def draft(self):
        return Draft(
            sections=[
                Section("1", "Introduction", 1, "We survey topics [1]."),
                Section("2", "Methods", 1, "Details in [2] and [3].\n%%FIGURE-PLACEHOLDER%%"),
                Section("2.1", "Depth", 2, "More on [3]."),
            ],
            title="A Survey",
            abstract="We cover the area comprehensively.",
        )

    def test_unknown_template(self):
        with pytest.raises(TemplateUnknown):
            get_template("made-up")
        with pytest.raises(TemplateUnknown):
            render_manuscript(self.draft(), bib(1, 2, 3), "made-up")

    def test_missing_bib_key(self):
        with pytest.raises(MissingBibKey) as err:
            render_manuscript(self.draft(), bib(1, 2), "generic-article")
        assert "ref3" in str(err.value)

    def test_render_generic_article(self):
        project = render_manuscript(self.draft(), bib(1, 2, 3), "generic-article")
        assert "\\documentclass[11pt]{article}" in project.main_tex
        assert "\\cite{ref1}" in project.main_tex
        assert "%%FIGURE-PLACEHOLDER%%" not in project.main_tex
        assert "\\bibliography{references}" in project.main_tex
        assert project.bibliography.count("@misc") == 3
        assert lint_manuscript(project.main_tex, project.bibliography) == []

    def test_render_two_column(self):
        project = render_manuscript(self.draft(), bib(1, 2, 3), "conference-2col")
        assert "twocolumn" in project.main_tex
        assert lint_manuscript(project.main_tex, project.bibliography) == []

    def test_unused_bib_keys_reported(self):
        project = render_manuscript(self.draft(), bib(1, 2, 3, 4), "generic-article")
        assert project.unused_bib_keys == ["ref4"]

    def test_escape_prose(self):
        assert escape_prose("50% of cases & more #1 with under_scores") == (
            "50\\% of cases \\& more \\#1 with under\\_scores"
        )
        assert escape_prose("% comment stays") == "% comment stays"
        assert escape_prose("already \\& escaped") == "already \\& escaped"

    def test_lint_flags_problems(self):
        problems = lint_manuscript(
            "\\begin{document}\\cite{ref9}", "@misc{ref1,\n  title = {{T}},\n}\n"
        )
        assert any("unclosed" in p for p in problems)
        assert any("ref9" in p for p in problems)
