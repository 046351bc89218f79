"""Deterministic structural parsing of agent reports.

Splits reports into sections on blank-line runs and resolves in-text citation
markers against the trailing reference list. Three marker forms are
recognized: "[15]", "[15†L10]" (anchor fragment ignored), and markdown
inline links "[label](url)". These parses feed diagnostics, zero-citation
detection, and the scripted-judge test mode; claim-to-URL pairing during
scoring comes from the claim extractor, which is authoritative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_TRAILING_PUNCT = ")\".,"


@dataclass(frozen=True)
class Section:
    """A verbatim slice of the normalized report; spans let callers reassemble."""

    index: int
    text: str
    start: int
    end: int


@dataclass
class RefMap:
    """Reference index -> URL, parsed from the trailing reference block."""

    entries: dict[int, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __contains__(self, index: int) -> bool:
        return index in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, index: int) -> str | None:
        return self.entries.get(index)


@dataclass(frozen=True)
class CitationMention:
    span: tuple[int, int]
    form: str  # bracket_number | bracket_number_fragment | inline_link
    urls: tuple[str, ...]


def normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


_SECTION_DELIM = re.compile(r"\n{2,}")


def split_sections(report_text: str) -> list[Section]:
    """Split on runs of two or more line breaks; empty fragments are dropped."""
    text = normalize_newlines(report_text)
    sections: list[Section] = []
    pos = 0
    for m in _SECTION_DELIM.finditer(text):
        chunk = text[pos : m.start()]
        if chunk:
            sections.append(Section(len(sections), chunk, pos, m.start()))
        pos = m.end()
    tail = text[pos:]
    if tail:
        sections.append(Section(len(sections), tail, pos, len(text)))
    return sections


def trim_url(url: str) -> str:
    """Strip common markdown artifacts from a URL's tail."""
    return url.rstrip(_TRAILING_PUNCT)


_REF_ENTRY = re.compile(r"^\s*\[(\d+)\]\s*(.+?)\s*$")
_MD_LINK = re.compile(r"\[[^\]]*\]\((\S+?)\)")
_BARE_URL = re.compile(r"https?://\S+")
_REF_HEADING = re.compile(
    r"^\s{0,3}(?:#{1,6}\s*)?\**\s*(references|sources|bibliography|citations|works cited)\b",
    re.IGNORECASE,
)


def _entry_url(rest: str) -> str | None:
    md = _MD_LINK.search(rest)
    if md:
        return trim_url(md.group(1))
    bare = list(_BARE_URL.finditer(rest))
    if bare:
        return trim_url(bare[-1].group(0))
    return None


def parse_reference_list(report_text: str) -> RefMap:
    """Parse the trailing "[N] title: URL" block; first occurrence wins conflicts."""
    lines = normalize_newlines(report_text).split("\n")
    block_start = len(lines)
    for i in range(len(lines) - 1, -1, -1):
        line = lines[i]
        if not line.strip():
            continue
        m = _REF_ENTRY.match(line)
        if m and _entry_url(m.group(2)):
            block_start = i
            continue
        if _REF_HEADING.match(line) and block_start < len(lines):
            block_start = i
        break

    refmap = RefMap()
    for line in lines[block_start:]:
        m = _REF_ENTRY.match(line)
        if not m:
            continue
        index = int(m.group(1))
        url = _entry_url(m.group(2))
        if url is None:
            continue
        if index in refmap.entries:
            if refmap.entries[index] != url:
                refmap.warnings.append(
                    f"duplicate reference index [{index}] with conflicting URL; keeping first"
                )
            continue
        refmap.entries[index] = url
    return refmap


_CITATION = re.compile(
    r"\[([^\]]*)\]\((\S+?)\)"  # markdown inline link
    r"|\[(\d+)(†[^\]]*)?\]"  # bracketed index, optional anchor fragment
)


def resolve_citations(
    section: Section, refmap: RefMap, diagnostics: list[str] | None = None
) -> list[CitationMention]:
    """Detect citation markers in one section and resolve numeric forms.

    Unresolvable numeric markers produce a diagnostic instead of a mention.
    Pure: identical inputs yield identical output, including order.
    """
    mentions: list[CitationMention] = []
    for m in _CITATION.finditer(section.text):
        if m.group(2) is not None:
            mentions.append(CitationMention(m.span(), "inline_link", (trim_url(m.group(2)),)))
            continue
        index = int(m.group(3))
        url = refmap.get(index)
        if url is None:
            if diagnostics is not None:
                diagnostics.append(
                    f"section {section.index}: unresolved citation marker [{index}] at {m.start()}"
                )
            continue
        form = "bracket_number_fragment" if m.group(4) else "bracket_number"
        mentions.append(CitationMention(m.span(), form, (url,)))
    return mentions


@dataclass
class CitationScan:
    """Whole-report citation diagnostics used for zero-citation detection."""

    mentions: list[CitationMention]
    refmap: RefMap
    n_markers: int
    n_resolved: int
    diagnostics: list[str]

    @property
    def low_resolution(self) -> bool:
        return self.n_markers > 0 and self.n_resolved / self.n_markers < 0.5


def scan_citations(report_text: str) -> CitationScan:
    refmap = parse_reference_list(report_text)
    diagnostics: list[str] = list(refmap.warnings)
    mentions: list[CitationMention] = []
    for section in split_sections(report_text):
        mentions.extend(resolve_citations(section, refmap, diagnostics))
    n_unresolved = sum(1 for d in diagnostics if "unresolved citation marker" in d)
    n_markers = len(mentions) + n_unresolved
    scan = CitationScan(mentions, refmap, n_markers, len(mentions), diagnostics)
    if scan.low_resolution:
        scan.diagnostics.append(
            f"fewer than half of numeric citation markers resolved "
            f"({scan.n_resolved}/{scan.n_markers}); reference block may be non-standard"
        )
    return scan
