"""Citation-command normalization, LaTeX hygiene, and manuscript rendering.

Operates on the constrained grammar of the pipeline's own output (prose
with bracket citations, placeholder tokens, markdown-ish headings), not on
arbitrary TeX. Normalization is idempotent and never invents keys: bracket
runs whose numbers all map to known entries become \\cite calls, anything
else is left alone and reported.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .bibtex import BibEntry, format_bibliography
from .compose import Draft
from .errors import MissingBibKey, TemplateUnknown

_BRACKET_RUN = re.compile(r"(?:\[\d+(?:\s*,\s*\d+)*\])+")
_BRACKET_GROUP = re.compile(r"\[(\d+(?:\s*,\s*\d+)*)\]")
_MD_HEADING = re.compile(r"^(#{1,4})\s+(.+?)\s*$", re.MULTILINE)
_FENCE_LINE = re.compile(r"^\s*```[a-zA-Z0-9]*\s*$", re.MULTILINE)
_TABLE_PLACEHOLDER = "%%TABLE-PLACEHOLDER%%"
_FIGURE_PLACEHOLDER = "%%FIGURE-PLACEHOLDER%%"


@dataclass
class HygieneReport:
    citations_normalized: int = 0
    environments_fixed: int = 0
    artifacts_removed: int = 0
    unresolved_keys: set[int] = field(default_factory=set)

    def merge(self, other: "HygieneReport") -> "HygieneReport":
        return HygieneReport(
            citations_normalized=self.citations_normalized + other.citations_normalized,
            environments_fixed=self.environments_fixed + other.environments_fixed,
            artifacts_removed=self.artifacts_removed + other.artifacts_removed,
            unresolved_keys=self.unresolved_keys | other.unresolved_keys,
        )

    def to_dict(self) -> dict:
        return {
            "citations_normalized": self.citations_normalized,
            "environments_fixed": self.environments_fixed,
            "artifacts_removed": self.artifacts_removed,
            "unresolved_keys": sorted(self.unresolved_keys),
        }


@dataclass(frozen=True)
class VenueTemplate:
    template_id: str
    description: str
    documentclass: str
    table_env: str
    float_placement: str
    headings: tuple[str, ...] = ("\\section", "\\subsection", "\\subsubsection", "\\paragraph")

    def heading_command(self, level: int) -> str:
        return self.headings[min(level, len(self.headings)) - 1]


_TEMPLATES: dict[str, VenueTemplate] = {}


def register_template(template: VenueTemplate) -> None:
    _TEMPLATES[template.template_id] = template


def get_template(template_id: str) -> VenueTemplate:
    try:
        return _TEMPLATES[template_id]
    except KeyError:
        raise TemplateUnknown(
            f"unknown venue template {template_id!r}; known: {sorted(_TEMPLATES)}"
        ) from None


register_template(
    VenueTemplate(
        template_id="generic-article",
        description="single-column article",
        documentclass="\\documentclass[11pt]{article}",
        table_env="table",
        float_placement="t",
    )
)
register_template(
    VenueTemplate(
        template_id="conference-2col",
        description="two-column conference layout",
        documentclass="\\documentclass[10pt,twocolumn]{article}",
        table_env="table*",
        float_placement="t",
    )
)


def normalize_latex(
    source: str, bib: list[BibEntry], template: VenueTemplate | None = None
) -> tuple[str, HygieneReport]:
    """Normalize citation commands and scrub pipeline artifacts.

    Bracket runs like ``[1][2]`` or ``[1, 2]`` become ``\\cite{ref1,ref2}``
    when every number maps to a known bib key; runs containing unknown
    numbers stay untouched and the numbers are reported. Idempotent.
    """
    template = template or get_template("generic-article")
    report = HygieneReport()
    known = {entry.key for entry in bib}

    def replace_run(match: re.Match) -> str:
        numbers: list[str] = []
        for group in _BRACKET_GROUP.findall(match.group(0)):
            for number in group.split(","):
                number = number.strip()
                if number not in numbers:
                    numbers.append(number)
        if all(f"ref{n}" in known for n in numbers):
            report.citations_normalized += 1
            return "\\cite{" + ",".join(f"ref{n}" for n in numbers) + "}"
        report.unresolved_keys.update(int(n) for n in numbers if f"ref{n}" not in known)
        return match.group(0)

    text = _BRACKET_RUN.sub(replace_run, source)

    def replace_heading(match: re.Match) -> str:
        report.environments_fixed += 1
        command = template.heading_command(len(match.group(1)))
        return f"{command}{{{match.group(2)}}}"

    text = _MD_HEADING.sub(replace_heading, text)

    # Harmonize table environments to the template's form and placement.
    def fix_table(match: re.Match) -> str:
        env, placement = match.group(1), match.group(2)
        if env == template.table_env and placement == template.float_placement:
            return match.group(0)
        report.environments_fixed += 1
        return f"\\begin{{{template.table_env}}}[{template.float_placement}]"

    text = re.sub(r"\\begin\{(table\*?)\}(?:\[([a-zA-Z!]*)\])?", fix_table, text)
    if template.table_env != "table":
        pattern = r"\\end\{table\}"
        fixed_ends = len(re.findall(pattern, text))
        if fixed_ends:
            text = re.sub(pattern, f"\\\\end{{{template.table_env}}}", text)

    for token, stub in (
        (_TABLE_PLACEHOLDER, "% placeholder: table to be supplied"),
        (_FIGURE_PLACEHOLDER, "% placeholder: figure to be supplied"),
    ):
        count = text.count(token)
        if count:
            report.artifacts_removed += count
            text = text.replace(token, stub)

    fences = _FENCE_LINE.findall(text)
    if fences:
        report.artifacts_removed += len(fences)
        text = _FENCE_LINE.sub("", text)

    return text, report


def escape_prose(text: str) -> str:
    """Escape LaTeX specials in prose lines; comment stubs stay comments."""
    lines = []
    for line in text.split("\n"):
        if line.lstrip().startswith("%"):
            lines.append(line)
        else:
            lines.append(re.sub(r"(?<!\\)([&#_%])", r"\\\1", line))
    return "\n".join(lines)


@dataclass
class LatexProject:
    main_tex: str
    bibliography: str
    hygiene: HygieneReport
    unused_bib_keys: list[str]


def render_manuscript(
    draft: Draft,
    bib: list[BibEntry],
    template_id: str,
    author: str = "Survey Engine",
) -> LatexProject:
    """Render the draft into a compile-ready two-file LaTeX project.

    Every citation key in the draft must have a bibliography row; bib rows
    nothing cites are reported, not dropped.
    """
    template = get_template(template_id)
    bib_keys = {entry.key for entry in bib}
    missing = sorted(draft.cite() - bib_keys, key=lambda k: int(k[3:]))
    if missing:
        raise MissingBibKey(f"draft cites keys with no bibliography entry: {missing}")

    report = HygieneReport()
    body_parts: list[str] = []
    for section in draft.sections:
        heading = template.heading_command(section.level)
        body, section_report = normalize_latex(section.body, bib, template)
        report = report.merge(section_report)
        body_parts.append(f"{heading}{{{escape_prose(section.heading)}}}\n\n{escape_prose(body)}")

    main_tex = "\n".join(
        [
            template.documentclass,
            f"\\title{{{escape_prose(draft.title) or 'Untitled Survey'}}}",
            f"\\author{{{escape_prose(author)}}}",
            "\\date{}",
            "",
            "\\begin{document}",
            "\\maketitle",
            "",
            "\\begin{abstract}",
            escape_prose(draft.abstract),
            "\\end{abstract}",
            "",
            "\n\n".join(body_parts),
            "",
            "\\bibliographystyle{plain}",
            "\\bibliography{references}",
            "\\end{document}",
            "",
        ]
    )

    cited = draft.cite()
    unused = sorted(bib_keys - cited, key=lambda k: int(k[3:]))
    return LatexProject(
        main_tex=main_tex,
        bibliography=format_bibliography(bib) if bib else "",
        hygiene=report,
        unused_bib_keys=unused,
    )


def lint_manuscript(main_tex: str, bibliography: str) -> list[str]:
    """Structural validation: balanced environments, cite/bib integrity.

    Stands in for a compiler pass in environments without TeX; returns a
    list of problems (empty = structurally sound).
    """
    problems: list[str] = []
    begins = re.findall(r"\\begin\{([^}]+)\}", main_tex)
    ends = re.findall(r"\\end\{([^}]+)\}", main_tex)
    stack: list[str] = []
    for token in re.findall(r"\\(begin|end)\{([^}]+)\}", main_tex):
        kind, env = token
        if kind == "begin":
            stack.append(env)
        elif not stack:
            problems.append(f"\\end{{{env}}} without matching begin")
        else:
            top = stack.pop()
            if top != env:
                problems.append(f"environment mismatch: begin{{{top}}} closed by end{{{env}}}")
    for env in stack:
        problems.append(f"unclosed environment {env}")
    if len(begins) != len(ends):
        problems.append("begin/end count mismatch")

    body = "\n".join(
        line for line in main_tex.split("\n") if not line.lstrip().startswith("%")
    )
    depth = 0
    for ch in re.sub(r"\\[{}]", "", body):
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
    if depth != 0:
        problems.append(f"unbalanced braces in document (depth {depth})")

    from .bibtex import parse_bibliography

    try:
        entries = parse_bibliography(bibliography)
    except Exception as exc:
        problems.append(f"bibliography does not parse: {exc}")
        entries = []
    bib_keys = {e.key for e in entries}
    for match in re.finditer(r"\\cite\{([^}]*)\}", main_tex):
        for key in match.group(1).split(","):
            if key.strip() and key.strip() not in bib_keys:
                problems.append(f"cite key {key.strip()} missing from bibliography")
    for token in (_TABLE_PLACEHOLDER, _FIGURE_PLACEHOLDER):
        if token in main_tex:
            problems.append(f"placeholder token {token} survived rendering")
    return problems
