import json

import pytest

from conftest import make_client

from revbench.backends import ChatResponse, ToolCall
from revbench.errors import ConfigError, ReviserTimeout
from revbench.fixes import (
    RefinedPrompt,
    ReviserLimits,
    SearchConfig,
    refine_feedback_pe,
    run_reviser,
    web_search,
)
from revbench.templates import pe_constraint_suffix, reviser_forced_final


class PlanBackend:
    def __init__(self, plan):
        self.plan = plan
        self.prompts = []

    def complete(self, prompt, model):
        self.prompts.append((prompt, model))
        return self.plan


class TestRefineFeedback:
    PLAN = "Feedback:\nadd a table\n\nEdit Actions:\n1) Action: INSERT\n"

    def test_concatenation_is_pure(self):
        client = make_client(PlanBackend(self.PLAN))
        refined = refine_feedback_pe("q", "report", "add a table", client)
        assert refined.final_text == self.PLAN + pe_constraint_suffix()
        assert refined.final_text.removesuffix(refined.suffix) == refined.edit_plan

    def test_suffix_is_shipped_asset(self):
        client = make_client(PlanBackend(self.PLAN))
        refined = refine_feedback_pe("q", "r", "f", client)
        assert "Apply ONLY the actions listed" in refined.suffix
        assert refined.final_text.endswith(refined.suffix)

    def test_plan_mentions_atomic_actions_in_system_prompt(self):
        backend = PlanBackend(self.PLAN)
        refine_feedback_pe("q", "r", "f", make_client(backend))
        prompt, model = backend.prompts[0]
        assert "DELETE | INSERT | MODIFY" in prompt.system_text
        assert model == "gpt-4.1"

    def test_empty_feedback_still_refined(self):
        backend = PlanBackend("plan for empty feedback")
        refined = refine_feedback_pe("q", "r", "", make_client(backend))
        assert isinstance(refined, RefinedPrompt)
        assert refined.edit_plan == "plan for empty feedback"
        assert len(backend.prompts) == 1


class TestWebSearch:
    def test_fixture_keyed_by_query(self):
        results = [{"title": f"t{i}", "url": f"https://u/{i}", "snippet": "s"} for i in range(5)]
        config = SearchConfig(fixture={"llm evals": results})
        assert web_search("llm evals", config) == results

    def test_truncation_to_top_k(self):
        results = [{"title": f"t{i}", "url": f"https://u/{i}", "snippet": "s"} for i in range(10)]
        config = SearchConfig(fixture={"q": results}, top_k=5)
        assert len(web_search("q", config)) == 5

    def test_unknown_query_synthesizes_deterministic_results(self):
        config = SearchConfig(fixture={})
        assert web_search("novel", config) == web_search("novel", config)
        assert len(web_search("novel", config)) == 5

    def test_empty_query_rejected(self):
        with pytest.raises(ConfigError):
            web_search("", SearchConfig(fixture={}))


class ScriptedReviser:
    """Replays a fixed list of ChatResponses; records the messages it saw."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.seen = []

    def chat(self, messages, model, temperature, top_p, max_tokens, tools=None):
        self.seen.append([dict(m) for m in messages])
        return self.responses.pop(0)


def search_call(i):
    return ChatResponse(
        content=None, tool_calls=(ToolCall(f"call{i}", "web_search", {"query": f"q{i}"}),)
    )


FINAL = ChatResponse(content="the revised report", tool_calls=())


class TestRunReviser:
    def _search_config(self):
        return SearchConfig(fixture={})

    def test_immediate_report_no_searches(self):
        backend = ScriptedReviser([FINAL])
        report, transcript = run_reviser(
            "q", "old report", "feedback", backend, "m", self._search_config()
        )
        assert report == "the revised report"
        assert transcript.search_calls_used == 0
        assert transcript.finalized_by == "model"

    def test_search_results_have_top5(self):
        backend = ScriptedReviser([search_call(1), FINAL])
        _, transcript = run_reviser("q", "r", "f", backend, "m", self._search_config())
        assert transcript.search_calls_used == 1
        results = json.loads(transcript.turns[0].tool_results[0])
        assert len(results) == 5

    def test_budget_enforced_with_forced_message(self):
        responses = [search_call(i) for i in range(1, 12)] + [FINAL]
        backend = ScriptedReviser(responses)
        limits = ReviserLimits(max_tool_calls=10)
        report, transcript = run_reviser(
            "q", "r", "f", backend, "m", self._search_config(), limits
        )
        assert transcript.search_calls_used == 10
        assert transcript.finalized_by == "forced"
        forced = reviser_forced_final()
        assert transcript.turns[10].tool_results == (forced,)
        # the forced message is the last tool result before finalization
        last_tool_turn = [t for t in transcript.turns if t.tool_results][-1]
        assert last_tool_turn.tool_results[-1] == forced
        assert report == "the revised report"

    def test_budget_never_exceeded_even_with_more_attempts(self):
        responses = [search_call(i) for i in range(1, 15)] + [FINAL]
        backend = ScriptedReviser(responses)
        limits = ReviserLimits(max_tool_calls=10, max_turns=40)
        _, transcript = run_reviser("q", "r", "f", backend, "m", self._search_config(), limits)
        assert transcript.search_calls_used == 10

    def test_system_prompt_renders_budget(self):
        backend = ScriptedReviser([FINAL])
        limits = ReviserLimits(max_tool_calls=7)
        run_reviser("q", "r", "f", backend, "m", self._search_config(), limits)
        system = backend.seen[0][0]["content"]
        assert "for 7 times" in system and "{max_tool_calls}" not in system

    def test_search_failure_becomes_tool_output(self):
        def boom(query, config):
            raise RuntimeError("endpoint down")

        backend = ScriptedReviser([search_call(1), FINAL])
        _, transcript = run_reviser(
            "q", "r", "f", backend, "m", self._search_config(), search_fn=boom
        )
        assert transcript.turns[0].tool_results[0] == "search failed: endpoint down"

    def test_timeout_when_never_finalizing(self):
        responses = [search_call(i) for i in range(100)]
        backend = ScriptedReviser(responses)
        limits = ReviserLimits(max_tool_calls=2, max_turns=5)
        with pytest.raises(ReviserTimeout):
            run_reviser("q", "r", "f", backend, "m", self._search_config(), limits)

    def test_default_turn_cap(self):
        assert ReviserLimits(max_tool_calls=10).turn_cap == 24
