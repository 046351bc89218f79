"""Inference-time revision fixes: the feedback refiner (structured edit plan
plus hard-coded constraint suffix) and the search-augmented reviser sub-agent.

The reviser is a ReAct loop over a tool-calling chat backend. Searches past
the budget are refused with a fixed forced-final message; the loop's last
assistant text becomes the revised report.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import requests

from .errors import ConfigError, ReviserTimeout
from .judging import JudgeClient
from .backends import ChatResponse
from .templates import Decoding, pe_constraint_suffix, render_prompt, reviser_forced_final

PE_REFINER_MODEL = "gpt-4.1"


@dataclass(frozen=True)
class RefinedPrompt:
    original_feedback: str
    edit_plan: str
    suffix: str
    final_text: str


def refine_feedback_pe(
    question: str, report: str, feedback: str, client: JudgeClient, model: str = PE_REFINER_MODEL
) -> RefinedPrompt:
    """One refiner call; the delivered text is plan + shipped suffix, byte-exact."""
    prompt = render_prompt(
        "pe_refiner",
        {"question": question, "report": report, "feedback": feedback},
        Decoding(temperature=0.0, max_tokens=client.config.max_tokens),
    )
    plan = client.complete(prompt, model=model)
    suffix = pe_constraint_suffix()
    return RefinedPrompt(feedback, plan, suffix, plan + suffix)


@dataclass
class SearchConfig:
    endpoint: str = "https://google.serper.dev/search"
    api_key_env: str = "SERPER_API_KEY"
    top_k: int = 5
    timeout_s: float = 30.0
    fixture: dict[str, list[dict]] | None = None  # stub mode: query -> results

    @classmethod
    def from_fixture_file(cls, path: str | Path, **kwargs) -> "SearchConfig":
        return cls(fixture=json.loads(Path(path).read_text(encoding="utf-8")), **kwargs)


def _stub_results(query: str, k: int) -> list[dict]:
    return [
        {
            "title": f"Stub result {i + 1} for {query}",
            "url": f"https://search.example/{abs(hash(query)) % 10**8}/{i + 1}",
            "snippet": f"Deterministic stub snippet {i + 1}.",
        }
        for i in range(k)
    ]


def web_search(query: str, config: SearchConfig) -> list[dict]:
    """Top-k {title, url, snippet} results; truncated to k even if the endpoint
    returns more. Raises on transport failure (caller renders error as data)."""
    if not query:
        raise ConfigError("search query must be non-empty")
    if config.fixture is not None:
        results = config.fixture.get(query) or _stub_results(query, config.top_k)
        return results[: config.top_k]
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(config.api_key_env, "") if config.api_key_env else ""
    if key:
        headers["X-API-KEY"] = key
    resp = requests.post(
        config.endpoint, json={"q": query}, headers=headers, timeout=config.timeout_s
    )
    resp.raise_for_status()
    data = resp.json()
    raw = data.get("organic", data.get("results", []))
    results = [
        {
            "title": r.get("title", ""),
            "url": r.get("link", r.get("url", "")),
            "snippet": r.get("snippet", ""),
        }
        for r in raw
    ]
    return results[: config.top_k]


@dataclass(frozen=True)
class ReviserLimits:
    max_tool_calls: int = 10
    top_k: int = 5
    temperature: float = 0.7
    top_p: float = 0.95
    max_tokens: int = 16384
    max_turns: int | None = None  # defaults to 2 * max_tool_calls + 4

    def __post_init__(self):
        if self.max_tool_calls < 1 or self.top_k < 1 or self.max_tokens < 1:
            raise ConfigError("reviser limits must be positive")

    @property
    def turn_cap(self) -> int:
        return self.max_turns if self.max_turns is not None else 2 * self.max_tool_calls + 4


@dataclass(frozen=True)
class ReviserTurn:
    assistant_text: str | None
    tool_calls: tuple[tuple[str, str], ...]  # (tool name, arguments JSON)
    tool_results: tuple[str, ...]


@dataclass
class ReviserTranscript:
    turns: list[ReviserTurn] = field(default_factory=list)
    search_calls_used: int = 0
    finalized_by: str = "model"  # model | forced


class ChatBackend(Protocol):
    def chat(
        self,
        messages: list[dict],
        model: str,
        temperature: float,
        top_p: float,
        max_tokens: int,
        tools: list[dict] | None = None,
    ) -> ChatResponse: ...


_WEB_SEARCH_TOOL = {
    "type": "function",
    "function": {
        "name": "web_search",
        "description": "Search the web for additional information.",
        "parameters": {
            "type": "object",
            "properties": {"query": {"type": "string", "description": "search query"}},
            "required": ["query"],
        },
    },
}


def _render_results(results: list[dict]) -> str:
    return json.dumps(results, ensure_ascii=False)


def run_reviser(
    question: str,
    report: str,
    feedback: str,
    backend: ChatBackend,
    model: str,
    search: SearchConfig | None = None,
    limits: ReviserLimits | None = None,
    search_fn: Callable[[str, SearchConfig], list[dict]] = web_search,
) -> tuple[str, ReviserTranscript]:
    """ReAct revision loop. Returns (revised report, transcript); raises
    ReviserTimeout when the model never finalizes within the turn cap."""
    limits = limits or ReviserLimits()
    search = search or SearchConfig(top_k=limits.top_k)
    forced_message = reviser_forced_final()

    system = render_prompt(
        "reviser",
        {
            "max_tool_calls": str(limits.max_tool_calls),
            "question": question,
            "report": report,
            "feedback": feedback,
        },
    )
    messages: list[dict] = [
        {"role": "system", "content": system.system_text},
        {"role": "user", "content": system.user_text},
    ]
    transcript = ReviserTranscript()

    for _ in range(limits.turn_cap):
        response = backend.chat(
            messages,
            model=model,
            temperature=limits.temperature,
            top_p=limits.top_p,
            max_tokens=limits.max_tokens,
            tools=[_WEB_SEARCH_TOOL],
        )
        if not response.tool_calls:
            transcript.turns.append(ReviserTurn(response.content, (), ()))
            return response.content or "", transcript

        assistant_msg: dict = {
            "role": "assistant",
            "content": response.content,
            "tool_calls": [
                {
                    "id": tc.id,
                    "type": "function",
                    "function": {"name": tc.name, "arguments": json.dumps(tc.arguments)},
                }
                for tc in response.tool_calls
            ],
        }
        messages.append(assistant_msg)

        results: list[str] = []
        for tc in response.tool_calls:
            if tc.name != "web_search":
                output = f"unknown tool: {tc.name}"
            elif transcript.search_calls_used >= limits.max_tool_calls:
                output = forced_message
                transcript.finalized_by = "forced"
            else:
                transcript.search_calls_used += 1
                query = str(tc.arguments.get("query", ""))
                try:
                    output = _render_results(search_fn(query, search))
                except Exception as exc:
                    output = f"search failed: {exc}"
            results.append(output)
            messages.append({"role": "tool", "tool_call_id": tc.id, "content": output})
        transcript.turns.append(
            ReviserTurn(
                response.content,
                tuple((tc.name, json.dumps(tc.arguments)) for tc in response.tool_calls),
                tuple(results),
            )
        )

    raise ReviserTimeout(
        f"reviser did not finalize within {limits.turn_cap} turns "
        f"({transcript.search_calls_used} searches used)"
    )
