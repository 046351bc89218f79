"""Simulated user feedback: checklist-grounded content feedback, seed-bank
format feedback, and the constant self-reflection message.

Content targets are sampled uniformly without replacement from criteria that
have not reached their ideal score; a criterion targeted in an earlier turn
stays eligible while it remains non-ideal. An empty pool is a no-feedback
signal (None), which ends the session upstream.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .backends import request_key
from .errors import ConfigError
from .judging import JudgeClient
from .metrics import TargetEntry, TargetSet
from .model import Checklist, Question, ScoreVector, ideal_score
from .templates import (
    Decoding,
    FormatSeed,
    format_seed_bank,
    reflect_feedback_text,
    render_prompt,
)

CONTENT = "content"
FORMAT = "format"
REFLECT = "reflect"

_COVERAGE_STATUS = {0.0: "not covered", 0.5: "partially covered", 1.0: "fully covered"}


@dataclass(frozen=True)
class Feedback:
    kind: str
    text: str
    targets: TargetSet | None = None
    offered_seed_ids: tuple[int, ...] | None = None
    provenance: str = ""

    def __post_init__(self):
        if self.kind not in (CONTENT, FORMAT, REFLECT):
            raise ValueError(f"unknown feedback kind {self.kind!r}")
        if self.kind == REFLECT and self.text != reflect_feedback_text():
            raise ValueError("reflect feedback must be the canonical constant")
        if self.kind == CONTENT and (self.targets is None or len(self.targets) == 0):
            raise ValueError("content feedback requires a non-empty target set")


def sample_content_targets(
    checklist: Checklist,
    scores_prev: ScoreVector,
    k: int,
    rng: random.Random,
    turn: int = 0,
) -> TargetSet | None:
    """Uniform sample of k criteria still off their ideal score; None if the
    pool is empty. Returns the whole pool (flagged) when it is smaller than k."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    scores_prev.validate_against(checklist)
    pool = [c for c in checklist if scores_prev.score_of(c.id) != ideal_score(c)]
    if not pool:
        return None
    short = len(pool) < k
    chosen = pool if short else rng.sample(pool, k)
    entries = tuple(
        TargetEntry(
            criterion_id=c.id,
            score=scores_prev.score_of(c.id),
            justification=scores_prev.justification_of(c.id),
            weight=c.weight,
        )
        for c in chosen
    )
    return TargetSet(turn=turn, entries=entries, short_pool=short)


def _rule_block(index: int, question: Question, entry: TargetEntry) -> str:
    criterion = question.checklist.get(entry.criterion_id)
    return (
        f"Rule {index}: {criterion.text}\n"
        f"Coverage status: {_COVERAGE_STATUS[entry.score]}\n"
        f"Rule weight: {entry.weight:g}\n"
        f"Evaluator's explanation: {entry.justification}"
    )


def simulate_content_feedback(
    question: Question, targets: TargetSet, client: JudgeClient
) -> Feedback:
    """Natural-language content feedback grounded in the targets' verdicts."""
    if len(targets) == 0:
        raise ValueError("targets must be non-empty")
    if len(targets) == 1:
        entry = targets.entries[0]
        criterion = question.checklist.get(entry.criterion_id)
        prompt = render_prompt(
            "content_feedback_1",
            {
                "question": question.prompt_text,
                "criterion": criterion.text,
                "coverage_status": _COVERAGE_STATUS[entry.score],
                "weight": f"{entry.weight:g}",
                "justification": entry.justification,
            },
            Decoding(temperature=0.0, max_tokens=client.config.max_tokens),
        )
    else:
        rules = "\n\n".join(
            _rule_block(i + 1, question, e) for i, e in enumerate(targets.entries)
        )
        prompt = render_prompt(
            "content_feedback_k",
            {"question": question.prompt_text, "rules": rules},
            Decoding(temperature=0.0, max_tokens=client.config.max_tokens),
        )
    text = client.complete(prompt)
    return Feedback(
        kind=CONTENT,
        text=text,
        targets=targets,
        provenance=request_key(prompt, client.config.model),
    )


def simulate_format_feedback(
    question: Question,
    report: str,
    rng: random.Random,
    client: JudgeClient,
    seed_bank: tuple[FormatSeed, ...] | None = None,
) -> Feedback:
    """Offer three random seeds; the simulator picks and tailors one."""
    bank = seed_bank if seed_bank is not None else format_seed_bank()
    if len(bank) < 3:
        raise ConfigError(f"format seed bank needs >= 3 entries, got {len(bank)}")
    offered = rng.sample(list(bank), 3)
    seeds_text = "\n".join(f"{i + 1}. {seed.text}" for i, seed in enumerate(offered))
    prompt = render_prompt(
        "format_feedback",
        {"question": question.prompt_text, "report": report, "seeds": seeds_text},
        Decoding(temperature=0.0, max_tokens=client.config.max_tokens),
    )
    text = client.complete(prompt)
    return Feedback(
        kind=FORMAT,
        text=text,
        offered_seed_ids=tuple(seed.id for seed in offered),
        provenance=request_key(prompt, client.config.model),
    )


def reflect_feedback() -> Feedback:
    return Feedback(kind=REFLECT, text=reflect_feedback_text(), provenance="constant")
