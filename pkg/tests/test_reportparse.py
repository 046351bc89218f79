from hypothesis import given
from hypothesis import strategies as st

from revbench.reportparse import (
    RefMap,
    Section,
    normalize_newlines,
    parse_reference_list,
    resolve_citations,
    scan_citations,
    split_sections,
    trim_url,
)


class TestSplitSections:
    def test_single_delimiter(self):
        sections = split_sections("A\n\nB")
        assert [s.text for s in sections] == ["A", "B"]

    def test_crlf_and_triple_newline(self):
        sections = split_sections("A\r\n\r\nB\n\n\nC")
        assert [s.text for s in sections] == ["A", "B", "C"]

    def test_empty_report(self):
        assert split_sections("") == []

    def test_empty_fragments_dropped(self):
        assert [s.text for s in split_sections("\n\nA\n\n\n\nB\n\n")] == ["A", "B"]

    def test_spans_reassemble_bytes(self):
        text = "\n\nA line\nstill A\n\n\nB\n\n"
        normalized = normalize_newlines(text)
        sections = split_sections(text)
        for s in sections:
            assert normalized[s.start : s.end] == s.text

    @given(
        st.lists(
            st.text(alphabet=st.characters(blacklist_characters="\r"), min_size=1).filter(
                lambda t: "\n\n" not in t and not t.startswith("\n") and not t.endswith("\n")
            ),
            min_size=0,
            max_size=6,
        ),
        st.randoms(use_true_random=False),
    )
    def test_split_then_join_is_identity(self, parts, rnd):
        delims = [("\n" * rnd.randint(2, 4)) for _ in parts]
        text = "".join(d + p for p, d in zip(parts, delims))
        normalized = normalize_newlines(text)
        sections = split_sections(text)
        assert [s.text for s in sections] == [p for p in parts if p]
        # reassembly via recorded spans reproduces the normalized text
        rebuilt = []
        pos = 0
        for s in sections:
            rebuilt.append(normalized[pos : s.start])
            rebuilt.append(s.text)
            pos = s.end
        rebuilt.append(normalized[pos:])
        assert "".join(rebuilt) == normalized


REPORT_WITH_REFS = """Intro paragraph citing [1] and [2†L3].

Body with an inline [example](https://inline.example/a).

## References

[1] Why DeepSeek v3 matters in the world of LLMs - Kiseki Labs: https://www.kisekilabs.com/blog-posts/why-deepseek-v3-matters
[2] https://api-docs.deepseek.com/news/news250120
"""


class TestParseReferenceList:
    def test_title_colon_url_form(self):
        refmap = parse_reference_list(REPORT_WITH_REFS)
        assert refmap.get(1) == "https://www.kisekilabs.com/blog-posts/why-deepseek-v3-matters"
        assert refmap.get(2) == "https://api-docs.deepseek.com/news/news250120"

    def test_no_reference_block(self):
        assert len(parse_reference_list("Just prose.\n\nMore prose.")) == 0

    def test_markdown_link_entry(self):
        text = "Body.\n\n[3] [A title](https://md.example/page)\n"
        assert parse_reference_list(text).get(3) == "https://md.example/page"

    def test_duplicate_conflicting_index_first_wins(self):
        text = (
            "Body.\n\nReferences\n"
            "[1] https://first.example/a\n"
            "[2] https://second.example/b\n"
            "[2] https://conflict.example/c\n"
        )
        refmap = parse_reference_list(text)
        assert len(refmap) == 2
        assert refmap.get(2) == "https://second.example/b"
        assert len(refmap.warnings) == 1

    def test_body_lines_not_swallowed(self):
        text = "A claim [1] made mid-report.\n\n[1] https://ref.example/x\n"
        refmap = parse_reference_list(text)
        assert len(refmap) == 1


class TestResolveCitations:
    def _section(self, text):
        return Section(0, text, 0, len(text))

    def test_bracket_number(self):
        refmap = RefMap({15: "https://u.example/p"})
        mentions = resolve_citations(self._section("dividing society into 7 levels [15]"), refmap)
        assert len(mentions) == 1
        assert mentions[0].form == "bracket_number"
        assert mentions[0].urls == ("https://u.example/p",)

    def test_fragment_forms(self):
        refmap = RefMap({15: "https://u.example/p", 7: "https://u.example/q"})
        mentions = resolve_citations(self._section("…[15†L10][7†summary]"), refmap)
        assert [m.form for m in mentions] == ["bracket_number_fragment"] * 2
        assert [m.urls[0] for m in mentions] == ["https://u.example/p", "https://u.example/q"]

    def test_inline_link(self):
        text = "[pmc.ncbi.nlm.nih.gov](https://pmc.ncbi.nlm.nih.gov/articles/PMC11042250/#:~:text=Conclusion)."
        mentions = resolve_citations(self._section(text), RefMap())
        assert len(mentions) == 1
        assert mentions[0].form == "inline_link"
        assert mentions[0].urls == (
            "https://pmc.ncbi.nlm.nih.gov/articles/PMC11042250/#:~:text=Conclusion",
        )

    def test_unresolved_marker_yields_diagnostic_not_mention(self):
        diagnostics = []
        mentions = resolve_citations(self._section("claim [99]"), RefMap(), diagnostics)
        assert mentions == []
        assert len(diagnostics) == 1 and "[99]" in diagnostics[0]

    def test_purity(self):
        refmap = RefMap({1: "https://u.example/p"})
        section = self._section("x [1] y [1]")
        assert resolve_citations(section, refmap) == resolve_citations(section, refmap)

    def test_mention_urls_appear_in_report(self):
        scan = scan_citations(REPORT_WITH_REFS)
        for mention in scan.mentions:
            for url in mention.urls:
                assert url in REPORT_WITH_REFS

    def test_malformed_fragment_ignored(self):
        refmap = RefMap({5: "https://u.example/p"})
        assert resolve_citations(self._section("odd [5L23] marker"), refmap) == []


class TestScan:
    def test_low_resolution_flag(self):
        text = "claims [1][2][3] with no reference block\n"
        scan = scan_citations(text)
        assert scan.n_markers == 3 and scan.n_resolved == 0
        assert scan.low_resolution
        assert any("fewer than half" in d for d in scan.diagnostics)

    def test_trim_url(self):
        assert trim_url("https://x.example/a).,") == "https://x.example/a"
