"""Synthetic agent and scripted judge for deterministic offline runs.

The synthetic agent evolves a hidden per-criterion ternary state: feedback
targets flip to their ideal score with probability p_inc, and every other
previously achieved criterion degrades one ternary step with probability
p_break. Each emitted report embeds machine-readable fenced blocks with the
intended scores and claims; the scripted judge answers every judging prompt
by reading those blocks, so a whole run is a pure function of its seeds.

Synthetic checklist criteria follow the text convention
"... synthetic topic <id>." so the scripted coverage judge can recover the
criterion id from the rendered prompt alone.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path

from .backends import ChatResponse, ReplayBackend
from .errors import ConfigError, ScriptedResponseMissing
from .feedback import Feedback
from .model import (
    Checklist,
    Criterion,
    Dataset,
    Provenance,
    Question,
    SourceDataset,
)
from .dataset import content_hash
from .templates import PromptPair, presentation_questions

STATE_FENCE = "synthetic-state"
CLAIMS_FENCE = "synthetic-claims"
_TOPIC_RE = re.compile(r"synthetic topic ([A-Za-z0-9_.\-]+)")


@dataclass(frozen=True)
class SyntheticBehavior:
    """Stochastic revision dynamics for the synthetic agent."""

    p_inc: float = 0.9
    p_break: float = 0.1
    cite_rate: float = 0.8
    seed: int = 0
    n_claims: int = 4
    init_full: float = 0.3  # P(criterion starts at 1)
    init_partial: float = 0.2  # P(criterion starts at 0.5)

    def __post_init__(self):
        for name in ("p_inc", "p_break", "cite_rate", "init_full", "init_partial"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.init_full + self.init_partial > 1.0:
            raise ConfigError("init_full + init_partial must be <= 1")

    @classmethod
    def from_file(cls, path: str | Path) -> "SyntheticBehavior":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def synthetic_criterion_text(criterion_id: str, negative: bool = False) -> str:
    verb = "mentions" if negative else "covers"
    return f"The report {verb} synthetic topic {criterion_id}."


def synthetic_question(
    question_id: str, weights: list[float], source: SourceDataset = SourceDataset.CUSTOM
) -> Question:
    criteria = tuple(
        Criterion(
            id=f"{question_id}.c{i + 1}",
            text=synthetic_criterion_text(f"{question_id}.c{i + 1}", negative=w < 0),
            weight=w,
            source_dataset=source,
        )
        for i, w in enumerate(weights)
    )
    return Question(
        id=question_id,
        prompt_text=f"Synthetic research question {question_id}: summarize the designated topics.",
        checklist=Checklist(question_id=question_id, criteria=criteria),
        dataset=source,
    )


def synthetic_dataset(
    name: str, weights_per_question: dict[str, list[float]]
) -> Dataset:
    source = SourceDataset.classify(name)
    questions = tuple(
        synthetic_question(qid, ws, source) for qid, ws in weights_per_question.items()
    )
    return Dataset(
        name=name,
        questions=questions,
        provenance=Provenance(f"synthetic:{name}", content_hash(name, questions)),
    )


def _degrade(weight: float, score: float) -> float:
    # one ternary step away from the ideal for this weight sign
    if weight > 0:
        return 0.5 if score == 1.0 else 0.0
    return 0.5 if score == 0.0 else 1.0


def _achieved(weight: float, score: float) -> bool:
    return (weight > 0 and score > 0) or (weight < 0 and score < 1)


class SyntheticAgent:
    """Stateful report generator driven by SyntheticBehavior."""

    def __init__(self, behavior: SyntheticBehavior, question: Question, seed: int | None = None):
        self.behavior = behavior
        self.question = question
        self.rng = random.Random(behavior.seed if seed is None else seed)
        self.state: dict[str, float] = {}
        self.turn = 0

    def _draw_initial(self) -> None:
        for c in self.question.checklist:
            u = self.rng.random()
            if u < self.behavior.init_full:
                self.state[c.id] = 1.0
            elif u < self.behavior.init_full + self.behavior.init_partial:
                self.state[c.id] = 0.5
            else:
                self.state[c.id] = 0.0

    def _apply_dynamics(self, feedback: Feedback | None) -> None:
        targets: tuple[str, ...] = ()
        if feedback is not None and feedback.targets is not None:
            targets = feedback.targets.criterion_ids()
        start = dict(self.state)
        for cid in targets:
            if self.rng.random() < self.behavior.p_inc:
                c = self.question.checklist.get(cid)
                self.state[cid] = 1.0 if c.weight > 0 else 0.0
        for c in self.question.checklist:
            if c.id in targets:
                continue
            if _achieved(c.weight, start[c.id]) and self.rng.random() < self.behavior.p_break:
                self.state[c.id] = _degrade(c.weight, start[c.id])

    def step(self, feedback: Feedback | None) -> str:
        """Advance one turn and emit the report for it."""
        self.turn += 1
        if self.turn == 1:
            self._draw_initial()
        else:
            self._apply_dynamics(feedback)
        return self._render()

    def _render(self) -> str:
        qid = self.question.id
        claims = []
        cited: list[tuple[int, str]] = []
        for j in range(1, self.behavior.n_claims + 1):
            urls: list[str] = []
            if self.rng.random() < self.behavior.cite_rate:
                url = f"https://source.example/{qid}/t{self.turn}/{j}"
                urls.append(url)
                cited.append((len(cited) + 1, url))
            claims.append(
                {"claim": f"Synthetic finding {j} for {qid} at turn {self.turn}.", "url": urls}
            )

        lines = [
            f"# Synthetic report: {qid} (turn {self.turn})",
            "",
            "This draft responds to the research question with deterministic filler",
            "prose; the machine-readable blocks below carry the intended coverage",
            "state and the claims for the factuality pipeline.",
            "",
            f"```{STATE_FENCE}",
            json.dumps({"scores": self.state}, sort_keys=True),
            "```",
            "",
            f"```{CLAIMS_FENCE}",
            json.dumps(claims, sort_keys=True),
            "```",
            "",
        ]
        body = []
        ref_index = 0
        for j, claim in enumerate(claims, start=1):
            if claim["url"]:
                ref_index += 1
                body.append(f"Synthetic finding {j} for {qid} at turn {self.turn}. [{ref_index}]")
            else:
                body.append(f"Synthetic finding {j} for {qid} at turn {self.turn}.")
        lines.append(" ".join(body))
        if cited:
            lines.extend(["", "## References", ""])
            lines.append("\n".join(f"[{i}] {url}" for i, url in cited))
        lines.append("")
        return "\n".join(lines)


def _between(text: str, open_tag: str, close_tag: str | None) -> str | None:
    start = text.find(open_tag)
    if start < 0:
        return None
    start += len(open_tag)
    if close_tag is None:
        return text[start:]
    end = text.rfind(close_tag)
    if end < 0 or end < start:
        return None
    return text[start:end]


def _fence_payload(text: str, fence: str) -> str | None:
    marker = f"```{fence}\n"
    start = text.find(marker)
    if start < 0:
        return None
    start += len(marker)
    end = text.find("\n```", start)
    if end < 0:
        return None
    return text[start:end]


class SyntheticJudgeBackend:
    """Rule-based scripted judge: reads the report's fenced blocks and answers
    every judging template deterministically."""

    def __init__(self):
        self.calls = 0

    def complete(self, prompt: PromptPair, model: str) -> str:
        self.calls += 1
        tid = prompt.template_id
        user = prompt.user_text
        if tid == "coverage":
            return self._coverage(user)
        if tid == "presentation":
            return self._presentation(user)
        if tid == "claim_extraction":
            section = _between(user, "<highlighted_section>\n", "\n</highlighted_section>")
            payload = _fence_payload(section or "", CLAIMS_FENCE)
            return payload if payload is not None else "[]"
        if tid == "support":
            return '{"result": "supported"}'
        if tid == "pairwise_format":
            return '{"score": 1.0}'
        if tid == "summarizer":
            content = _between(user, "<webpage_content>\n", "\n</webpage_content>") or ""
            return content[: max(1, len(content) // 5)]
        if tid == "content_feedback_1":
            rule = _between(user, "Evaluation rule:\n", "\n\nCoverage status:") or "the flagged rule"
            return f"Could you revise the report to properly handle this: {rule}"
        if tid == "content_feedback_k":
            return "A few evaluation rules scored below their ideal; please revise the report to address each of them."
        if tid == "format_feedback":
            seeds = _between(user, "Seed feedback examples:\n", None) or ""
            first = seeds.split("\n", 1)[0].removeprefix("1. ").strip() or "improve formatting"
            return f"One formatting request: {first}"
        if tid == "pe_refiner":
            feedback = _between(user, "Original Feedback:\n", None) or ""
            return (
                "Feedback:\n"
                f"{feedback}\n\n"
                "Edit Actions:\n"
                "1) Action: MODIFY\n"
                "   Location:\n"
                '   - Section: "Synthetic report"\n'
                "   - Subsection: N/A\n"
                '   - Anchor: "This draft responds to the research question"\n'
                "   Content Spec:\n"
                "   - What to change: address the feedback locally\n"
                "   - Must-include: the requested content\n"
            )
        raise ScriptedResponseMissing(f"synthetic judge cannot answer template {tid!r}")

    def _coverage(self, user: str) -> str:
        criterion = _between(user, "<criterion>\n", "\n</criterion>") or ""
        report = _between(user, "<report>\n", "\n</report>") or ""
        m = _TOPIC_RE.search(criterion)
        payload = _fence_payload(report, STATE_FENCE)
        if not m or payload is None:
            return '{"score": 0.0, "justification": "no synthetic state available"}'
        cid = m.group(1).rstrip(".")
        scores = json.loads(payload)["scores"]
        score = scores.get(cid, 0.0)
        return json.dumps(
            {"score": score, "justification": f"scripted verdict for {cid}"}, sort_keys=True
        )

    def _presentation(self, user: str) -> str:
        criterion = _between(user, "<criterion>\n", "\n</criterion>") or ""
        report = _between(user, "<report>\n", "\n</report>") or ""
        for pq in presentation_questions():
            if pq.text == criterion and pq.na_allowed:
                has_table = "\n|" in report
                has_crossrefs = "see Section" in report
                applicable = has_table if pq.index == 7 else has_crossrefs
                if not applicable:
                    return '{"score": -1, "justification": "not applicable"}'
                return '{"score": 1, "justification": "scripted pass"}'
        return '{"score": 1, "justification": "scripted pass"}'

    def chat(
        self,
        messages: list[dict],
        model: str,
        temperature: float,
        top_p: float,
        max_tokens: int,
        tools: list[dict] | None = None,
    ) -> ChatResponse:
        """Scripted reviser: return the previous report unchanged, no searches."""
        self.calls += 1
        user = next((m["content"] for m in messages if m.get("role") == "user"), "")
        report = _between(user, "## Current Report\n\n", "\n\n## Feedback for Revision")
        return ChatResponse(content=report if report is not None else "", tool_calls=())


def load_scripted_backend(spec: str):
    """Build the scripted judge backend from a CLI spec: the literal string
    "synthetic" or a path to {"mode": "synthetic"} / {"mode": "replay", ...}."""
    if spec == "synthetic":
        return SyntheticJudgeBackend()
    raw = json.loads(Path(spec).read_text(encoding="utf-8"))
    mode = raw.get("mode", "synthetic")
    if mode == "synthetic":
        return SyntheticJudgeBackend()
    if mode == "replay":
        return ReplayBackend(dict(raw.get("responses", {})))
    raise ConfigError(f"unknown scripted-judges mode {mode!r}")


def stub_reader_transport(url: str) -> str:
    return f"Synthetic source page for {url}. The page confirms all synthetic findings."
