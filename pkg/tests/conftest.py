"""Shared fixtures and test doubles."""

from __future__ import annotations

from typing import Callable

import pytest

from revbench.errors import TransportError
from revbench.judging import JudgeClient, JudgeConfig, RetryPolicy
from revbench.model import Checklist, Criterion, CriterionScore, Question, ScoreVector
from revbench.templates import PromptPair


def make_checklist(weights: list[float], qid: str = "q1") -> Checklist:
    criteria = tuple(
        Criterion(id=f"c{i + 1}", text=f"covers topic c{i + 1}", weight=w)
        for i, w in enumerate(weights)
    )
    return Checklist(question_id=qid, criteria=criteria)


def make_scores(checklist: Checklist, values: list[float]) -> ScoreVector:
    return ScoreVector(
        {
            c.id: CriterionScore(v, f"justification for {c.id}")
            for c, v in zip(checklist.criteria, values)
        }
    )


def make_question(weights: list[float], qid: str = "q1") -> Question:
    return Question(
        id=qid,
        prompt_text=f"Research question {qid}?",
        checklist=make_checklist(weights, qid),
    )


class FnBackend:
    """Backend answering from a function of the prompt; counts calls."""

    def __init__(self, fn: Callable[[PromptPair], str]):
        self.fn = fn
        self.calls = 0

    def complete(self, prompt: PromptPair, model: str) -> str:
        self.calls += 1
        return self.fn(prompt)


class FlakyBackend:
    """Fails with TransportError n times, then delegates."""

    def __init__(self, failures: int, inner):
        self.failures = failures
        self.inner = inner
        self.attempts = 0

    def complete(self, prompt: PromptPair, model: str) -> str:
        self.attempts += 1
        if self.attempts <= self.failures:
            raise TransportError("injected timeout")
        return self.inner.complete(prompt, model)


def make_client(backend, **config_kwargs) -> JudgeClient:
    config_kwargs.setdefault("retry", RetryPolicy(max_attempts=3, backoff_s=0.0))
    return JudgeClient(backend, JudgeConfig(**config_kwargs))


@pytest.fixture
def const_client():
    def factory(text: str) -> JudgeClient:
        return make_client(FnBackend(lambda prompt: text))

    return factory
