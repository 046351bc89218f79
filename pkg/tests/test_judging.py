import json
import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FlakyBackend, FnBackend, make_client, make_question

from revbench.backends import CountingBackend, ReplayBackend, request_key
from revbench.errors import JudgeFormatError, ScriptedResponseMissing, TemplateError, TransportError
from revbench.judging import (
    extract_claims,
    judge_claim_support,
    judge_coverage,
    judge_format_incorporation,
    judge_presentation,
    parse_claim_list,
    parse_pairwise_score,
    parse_presentation_verdict,
    parse_score_justification,
    parse_support_label,
)
from revbench.model import Criterion
from revbench.reportparse import Section
from revbench.templates import (
    Decoding,
    negative_weight_reminder,
    render_prompt,
    verify_assets,
)


class TestRenderPrompt:
    def test_coverage_user_wraps_tags(self):
        pair = render_prompt(
            "coverage", {"question": "Q?", "report": "R body", "criterion": "the rule"}
        )
        assert "<criterion>\nthe rule\n</criterion>" in pair.user_text
        assert "<question>\nQ?\n</question>" in pair.user_text
        assert "<report>\nR body\n</report>" in pair.user_text

    def test_missing_binding_names_placeholder(self):
        with pytest.raises(TemplateError, match="report"):
            render_prompt("coverage", {"question": "Q?", "criterion": "c"})

    def test_unknown_template(self):
        with pytest.raises(TemplateError):
            render_prompt("nope", {})

    def test_literal_json_braces_survive(self):
        pair = render_prompt(
            "coverage", {"question": "q", "report": "r", "criterion": "c"}
        )
        assert '{"score": float, "justification": string}' in pair.system_text

    def test_negative_coverage_call_ends_with_reminder(self, const_client):
        client = const_client('{"score": 0.0, "justification": "ok"}')
        captured = {}

        class Spy:
            def complete(self, prompt, model):
                captured["user"] = prompt.user_text
                return '{"score": 0.0, "justification": "ok"}'

        client = make_client(Spy())
        q = make_question([1.0])
        judge_coverage(q, "report", Criterion(id="n", text="bad topic", weight=-1.0), client)
        assert captured["user"].endswith(negative_weight_reminder())
        reminder_head = "Note: this is a negative criterion."
        assert negative_weight_reminder().startswith(reminder_head)

    def test_positive_coverage_call_has_no_reminder(self):
        captured = {}

        class Spy:
            def complete(self, prompt, model):
                captured["user"] = prompt.user_text
                return '{"score": 1.0, "justification": "ok"}'

        client = make_client(Spy())
        q = make_question([1.0])
        judge_coverage(q, "report", q.checklist.get("c1"), client)
        assert "negative criterion" not in captured["user"]

    def test_asset_manifest_verifies(self):
        assert verify_assets() == []

    def test_per_kind_template_override(self):
        from revbench.judging import JudgeConfig

        config = JudgeConfig(templates={"coverage": "my_custom_coverage"})
        assert config.template_for("coverage") == "my_custom_coverage"
        assert config.template_for("support") == "support"


class TestVerdictParsers:
    def test_score_justification(self):
        assert parse_score_justification('{"score": 0.5, "justification": "partially covers"}') == (
            0.5,
            "partially covers",
        )

    def test_code_fence_repair(self):
        raw = '```json\n{"score": 1.0, "justification": "x"}\n```'
        assert parse_score_justification(raw)[0] == 1.0

    def test_prefix_noise_repair(self):
        raw = 'Sure! Here is the verdict: {"score": 0.0, "justification": "none"} hope it helps'
        assert parse_score_justification(raw)[0] == 0.0

    def test_unparseable_raises(self):
        with pytest.raises(JudgeFormatError):
            parse_score_justification("score: maybe")

    def test_score_snapping_within_epsilon(self):
        assert parse_score_justification('{"score": 0.5000000000001, "justification": ""}')[0] == 0.5

    def test_out_of_range_score(self):
        with pytest.raises(JudgeFormatError):
            parse_score_justification('{"score": 0.7, "justification": ""}')

    def test_claim_list_empty_urls_accepted(self):
        claims = parse_claim_list('[{"claim": "x", "url": []}]')
        assert claims == [{"claim": "x", "urls": []}]

    def test_claim_list_multiple_urls(self):
        claims = parse_claim_list('[{"claim": "x", "url": ["https://a", "https://b"]}]')
        assert claims[0]["urls"] == ["https://a", "https://b"]

    def test_claim_list_not_array(self):
        with pytest.raises(JudgeFormatError):
            parse_claim_list('{"claim": "x"}')

    def test_support_labels(self):
        assert parse_support_label('{"result": "supported"}') == "supported"
        assert parse_support_label('{"result": "contradictory"}') == "contradictory"
        with pytest.raises(JudgeFormatError):
            parse_support_label('{"result": "unknown"}')

    def test_pairwise_score_enum(self):
        assert parse_pairwise_score('{"score": 0.5}') == 0.5
        with pytest.raises(JudgeFormatError):
            parse_pairwise_score('{"score": 0.7}')

    def test_presentation_verdict(self):
        assert parse_presentation_verdict('{"score": -1, "justification": "n/a"}')[0] == -1
        with pytest.raises(JudgeFormatError):
            parse_presentation_verdict('{"score": 2, "justification": ""}')

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_fuzzed_scores_outside_enum_rejected(self, value):
        raw = json.dumps({"score": value, "justification": ""})
        if any(abs(value - t) <= 1e-9 for t in (0.0, 0.5, 1.0)):
            assert parse_score_justification(raw)[0] in (0.0, 0.5, 1.0)
        else:
            with pytest.raises(JudgeFormatError):
                parse_score_justification(raw)

    @given(st.text(max_size=40))
    def test_fuzzed_support_labels_rejected(self, label):
        raw = json.dumps({"result": label})
        if label.strip().lower() in ("supported", "insufficient", "contradictory"):
            assert parse_support_label(raw) == label.strip().lower()
        else:
            with pytest.raises(JudgeFormatError):
                parse_support_label(raw)


class TestJudgeOps:
    def test_coverage_parses(self, const_client):
        client = const_client('{"score": 0.5, "justification": "partially covers"}')
        q = make_question([1.0])
        assert judge_coverage(q, "r", q.checklist.get("c1"), client) == (0.5, "partially covers")

    def test_negative_criterion_score_one_passes_through(self, const_client):
        client = const_client('{"score": 1.0, "justification": "content present"}')
        q = make_question([1.0])
        score, _ = judge_coverage(q, "r", Criterion(id="n", text="t", weight=-1.0), client)
        assert score == 1.0

    def test_presentation_minus_one_only_for_na_capable(self, const_client):
        client = const_client('{"score": -1, "justification": "no tables"}')
        assert judge_presentation("report", 7, client) == -1
        with pytest.raises(JudgeFormatError):
            judge_presentation("report", 2, client)

    def test_support(self, const_client):
        client = const_client('{"result": "insufficient"}')
        assert judge_claim_support("c", "page not found", client) == "insufficient"

    def test_extract_claims_empty_section(self, const_client):
        client = const_client("[]")
        section = Section(0, "No factual content here.", 0, 24)
        assert extract_claims("full report", section, client) == []

    def test_extract_claims_two_urls(self, const_client):
        client = const_client('[{"claim": "c1", "url": ["https://a", "https://b"]}]')
        section = Section(0, "body", 0, 4)
        claims = extract_claims("full report", section, client)
        assert claims == [{"claim": "c1", "urls": ["https://a", "https://b"]}]

    def test_presentation_pass_verdict(self, const_client):
        client = const_client('{"score": 1, "justification": "well structured"}')
        assert judge_presentation("tidy report", 1, client) == 1

    def test_format_incorporation(self, const_client):
        client = const_client('{"score": 1.0}')
        q = make_question([1.0])
        assert judge_format_incorporation(q, "old", "new", "add a TL;DR", client) == 1.0


class TestClientCacheAndRetry:
    def _prompt(self, text="x"):
        return render_prompt("support", {"url_content": text, "claim": "c"}, Decoding())

    def test_identical_prompt_served_from_cache(self):
        backend = CountingBackend(FnBackend(lambda p: '{"result": "supported"}'))
        client = make_client(backend)
        prompt = self._prompt()
        assert client.complete(prompt) == client.complete(prompt)
        assert backend.calls == 1

    def test_distinct_prompts_not_conflated(self):
        backend = CountingBackend(FnBackend(lambda p: '{"result": "supported"}'))
        client = make_client(backend)
        client.complete(self._prompt("a"))
        client.complete(self._prompt("b"))
        assert backend.calls == 2

    def test_two_timeouts_then_success(self):
        backend = FlakyBackend(2, FnBackend(lambda p: "ok"))
        client = make_client(backend)
        assert client.complete(self._prompt()) == "ok"
        assert backend.attempts == 3

    def test_retry_exhaustion_carries_template_id(self):
        backend = FlakyBackend(99, FnBackend(lambda p: "ok"))
        client = make_client(backend)
        with pytest.raises(TransportError) as exc_info:
            client.complete(self._prompt())
        assert exc_info.value.template_id == "support"

    def test_concurrent_identical_requests_single_backend_call(self):
        release = threading.Event()

        class Slow:
            calls = 0

            def complete(self, prompt, model):
                Slow.calls += 1
                release.wait(timeout=5)
                return "done"

        client = make_client(Slow())
        prompt = self._prompt()
        results = []
        threads = [
            threading.Thread(target=lambda: results.append(client.complete(prompt)))
            for _ in range(4)
        ]
        for t in threads:
            t.start()
        release.set()
        for t in threads:
            t.join()
        assert results == ["done"] * 4
        assert Slow.calls == 1

    def test_disk_cache_round_trip(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        backend = CountingBackend(FnBackend(lambda p: "payload"))
        client = make_client(backend, cache_path=str(path))
        prompt = self._prompt()
        client.complete(prompt)
        client2 = make_client(backend, cache_path=str(path))
        assert client2.complete(prompt) == "payload"
        assert backend.calls == 1

    def test_scripted_replay_bit_identical(self):
        prompt = self._prompt()
        key = request_key(prompt, "gpt-4.1-mini")
        backend = ReplayBackend({key: '{"result": "supported"}'})
        client = make_client(backend)
        first = client.complete(prompt)
        second = make_client(ReplayBackend({key: '{"result": "supported"}'})).complete(prompt)
        assert first == second == '{"result": "supported"}'

    def test_scripted_missing_key_is_config_error(self):
        client = make_client(ReplayBackend({}))
        with pytest.raises(ScriptedResponseMissing):
            client.complete(self._prompt())
