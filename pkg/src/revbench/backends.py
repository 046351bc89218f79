"""Completion backends: HTTPS chat-completions, scripted replay, and test doubles.

Two call shapes are used by the harness:
  - complete(prompt, model): single system+user exchange returning raw text
    (all judging and simulation calls).
  - chat(...): full message list with optional tool definitions (reviser loop).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Protocol

import requests

from .errors import AuthError, ScriptedResponseMissing, TransportError
from .templates import PromptPair


def request_key(prompt: PromptPair, model: str) -> str:
    """Cache/replay key: template id, rendered texts, model, and decoding."""
    payload = json.dumps(
        {
            "template_id": prompt.template_id,
            "system": prompt.system_text,
            "user": prompt.user_text,
            "model": model,
            "temperature": prompt.decoding.temperature,
            "max_tokens": prompt.decoding.max_tokens,
        },
        sort_keys=True,
        ensure_ascii=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ToolCall:
    id: str
    name: str
    arguments: dict


@dataclass(frozen=True)
class ChatResponse:
    content: str | None
    tool_calls: tuple[ToolCall, ...] = ()


class CompletionBackend(Protocol):
    def complete(self, prompt: PromptPair, model: str) -> str: ...


class HttpBackend:
    """Chat-completions style endpoint; bearer token read from an env var."""

    def __init__(self, endpoint: str, auth_env: str = "", timeout_s: float = 120.0):
        self.endpoint = endpoint
        self.auth_env = auth_env
        self.timeout_s = timeout_s

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.auth_env, "") if self.auth_env else ""
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, body: dict) -> dict:
        try:
            resp = requests.post(
                self.endpoint, json=body, headers=self._headers(), timeout=self.timeout_s
            )
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise TransportError(f"transport failure: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"authentication rejected ({resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"retryable status {resp.status_code}")
        if resp.status_code >= 400:
            raise AuthError(f"request rejected ({resp.status_code}): {resp.text[:200]}")
        return resp.json()

    def complete(self, prompt: PromptPair, model: str) -> str:
        body = {
            "model": model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": prompt.decoding.temperature,
            "max_tokens": prompt.decoding.max_tokens,
        }
        data = self._post(body)
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc

    def chat(
        self,
        messages: list[dict],
        model: str,
        temperature: float,
        top_p: float,
        max_tokens: int,
        tools: list[dict] | None = None,
    ) -> ChatResponse:
        body: dict = {
            "model": model,
            "messages": messages,
            "temperature": temperature,
            "top_p": top_p,
            "max_tokens": max_tokens,
        }
        if tools:
            body["tools"] = tools
        data = self._post(body)
        try:
            message = data["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat response: {exc}") from exc
        calls = []
        for tc in message.get("tool_calls") or []:
            try:
                args = json.loads(tc["function"].get("arguments") or "{}")
            except json.JSONDecodeError:
                args = {}
            calls.append(ToolCall(tc.get("id", ""), tc["function"]["name"], args))
        return ChatResponse(message.get("content"), tuple(calls))


@dataclass
class ReplayBackend:
    """Deterministic backend serving canned text keyed by request hash."""

    responses: dict[str, str] = field(default_factory=dict)
    calls: int = 0

    def complete(self, prompt: PromptPair, model: str) -> str:
        self.calls += 1
        key = request_key(prompt, model)
        if key not in self.responses:
            raise ScriptedResponseMissing(
                f"no scripted response for template {prompt.template_id!r} (key {key[:12]}…)"
            )
        return self.responses[key]


class CountingBackend:
    """Wraps another backend and counts complete() calls (test instrumentation)."""

    def __init__(self, inner: CompletionBackend):
        self.inner = inner
        self.calls = 0

    def complete(self, prompt: PromptPair, model: str) -> str:
        self.calls += 1
        return self.inner.complete(prompt, model)
