"""Judge gateway: renders prompts, executes completions with caching and
retries, and parses strict structured verdicts.

Verdict parsers allow exactly one repair pass (strip code fences, take the
first JSON object/array) before raising JudgeFormatError; values outside the
enumerated sets are always rejected. Fallback scoring for exhausted errors
(coverage 0, presentation 0, support "insufficient") is applied by the
orchestrator, which also records the error flag.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .cache import CompletionCache
from .errors import AuthError, ConfigError, JudgeFormatError, TransportError
from .model import Criterion, Question
from .templates import (
    Decoding,
    PromptPair,
    negative_weight_reminder,
    presentation_questions,
    render_prompt,
)
from .backends import CompletionBackend, request_key
from .reportparse import Section

SUPPORT_LABELS = ("supported", "insufficient", "contradictory")
_SNAP_EPS = 1e-9


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_s: float = 1.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ConfigError("retry max_attempts must be >= 1")


@dataclass
class JudgeConfig:
    """Connection and model settings for all judging calls."""

    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4.1-mini"
    summarizer_model: str = "gpt-4.1-nano"
    auth_env: str = "OPENAI_API_KEY"
    parallelism: int = 1
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    cache_path: str | None = None
    max_tokens: int = 4096
    templates: dict[str, str] = field(default_factory=dict)  # judge kind -> template id

    def __post_init__(self):
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def template_for(self, kind: str) -> str:
        return self.templates.get(kind, kind)

    @classmethod
    def from_file(cls, path: str | Path) -> "JudgeConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        retry = RetryPolicy(**raw.pop("retry")) if "retry" in raw else RetryPolicy()
        return cls(retry=retry, **raw)


class JudgeClient:
    """Caching, retrying front door for all single-exchange completions."""

    def __init__(
        self,
        backend: CompletionBackend,
        config: JudgeConfig | None = None,
        cache: CompletionCache | None = None,
    ):
        self.backend = backend
        self.config = config or JudgeConfig()
        self.cache = cache if cache is not None else CompletionCache(self.config.cache_path)
        self._inflight: dict[str, threading.Event] = {}
        self._lock = threading.Lock()
        # global backend-call budget, shared across concurrent sessions
        self._capacity = threading.Semaphore(self.config.parallelism)

    def complete(self, prompt: PromptPair, model: str | None = None) -> str:
        model = model or self.config.model
        key = request_key(prompt, model)
        while True:
            cached = self.cache.get(key)
            if cached is not None:
                return cached
            with self._lock:
                event = self._inflight.get(key)
                if event is None:
                    self._inflight[key] = threading.Event()
                    break
            event.wait()
        try:
            with self._capacity:
                text = self._call_with_retries(prompt, model)
            self.cache.put(key, text)
            return text
        finally:
            with self._lock:
                self._inflight.pop(key).set()

    def _call_with_retries(self, prompt: PromptPair, model: str) -> str:
        policy = self.config.retry
        last: TransportError | None = None
        for attempt in range(1, policy.max_attempts + 1):
            try:
                return self.backend.complete(prompt, model)
            except AuthError:
                raise
            except TransportError as exc:
                last = exc
                if attempt < policy.max_attempts and policy.backoff_s > 0:
                    time.sleep(policy.backoff_s * 2 ** (attempt - 1))
        raise TransportError(
            f"backend failed after {policy.max_attempts} attempts: {last}",
            template_id=prompt.template_id,
        )


_FENCE = re.compile(r"^\s*```[a-zA-Z0-9_-]*\s*\n(.*?)\n?\s*```\s*$", re.DOTALL)


def _strip_fences(text: str) -> str:
    m = _FENCE.match(text.strip())
    return m.group(1) if m else text


def _first_json(text: str, opener: str, closer: str) -> str | None:
    start = text.find(opener)
    if start < 0:
        return None
    depth = 0
    in_str = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == opener:
            depth += 1
        elif ch == closer:
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


def parse_json_payload(raw: str, kind: str = "object"):
    """Parse judge output as JSON with one deterministic repair pass."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        pass
    opener, closer = ("{", "}") if kind == "object" else ("[", "]")
    candidate = _first_json(_strip_fences(raw), opener, closer)
    if candidate is not None:
        try:
            return json.loads(candidate)
        except json.JSONDecodeError:
            pass
    raise JudgeFormatError(f"not valid JSON ({kind})", raw=raw)


def snap_ternary(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise JudgeFormatError(f"score is not numeric: {value!r}")
    for target in (0.0, 0.5, 1.0):
        if abs(float(value) - target) <= _SNAP_EPS:
            return target
    raise JudgeFormatError(f"score {value!r} not in {{0, 0.5, 1}}")


def parse_score_justification(raw: str) -> tuple[float, str]:
    data = parse_json_payload(raw, "object")
    if not isinstance(data, dict) or "score" not in data:
        raise JudgeFormatError("missing 'score' field", raw=raw)
    return snap_ternary(data["score"]), str(data.get("justification", ""))


def parse_presentation_verdict(raw: str) -> tuple[int, str]:
    data = parse_json_payload(raw, "object")
    if not isinstance(data, dict) or "score" not in data:
        raise JudgeFormatError("missing 'score' field", raw=raw)
    value = data["score"]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) not in (-1.0, 0.0, 1.0):
        raise JudgeFormatError(f"presentation score {value!r} not in {{-1, 0, 1}}", raw=raw)
    return int(value), str(data.get("justification", ""))


def parse_claim_list(raw: str) -> list[dict]:
    data = parse_json_payload(raw, "array")
    if not isinstance(data, list):
        raise JudgeFormatError("claim list is not a JSON array", raw=raw)
    claims: list[dict] = []
    for item in data:
        if not isinstance(item, dict) or "claim" not in item:
            raise JudgeFormatError(f"malformed claim entry: {item!r}", raw=raw)
        urls = item.get("url", item.get("urls", []))
        if urls is None:
            urls = []
        if not isinstance(urls, list) or not all(isinstance(u, str) for u in urls):
            raise JudgeFormatError(f"malformed url list in claim entry: {item!r}", raw=raw)
        claims.append({"claim": str(item["claim"]), "urls": list(urls)})
    return claims


def parse_support_label(raw: str) -> str:
    data = parse_json_payload(raw, "object")
    if not isinstance(data, dict) or "result" not in data:
        raise JudgeFormatError("missing 'result' field", raw=raw)
    label = str(data["result"]).strip().lower()
    if label not in SUPPORT_LABELS:
        raise JudgeFormatError(f"support label {data['result']!r} not in {SUPPORT_LABELS}", raw=raw)
    return label


def parse_pairwise_score(raw: str) -> float:
    data = parse_json_payload(raw, "object")
    if not isinstance(data, dict) or "score" not in data:
        raise JudgeFormatError("missing 'score' field", raw=raw)
    return snap_ternary(data["score"])


def judge_coverage(
    question: Question, report: str, criterion: Criterion, client: JudgeClient
) -> tuple[float, str]:
    """Ternary coverage verdict for one criterion; negative criteria get the reminder."""
    prompt = render_prompt(
        client.config.template_for("coverage"),
        {"question": question.prompt_text, "report": report, "criterion": criterion.text},
        Decoding(temperature=0.0, max_tokens=client.config.max_tokens),
    )
    if criterion.weight < 0:
        user = prompt.user_text
        if not user.endswith("\n"):
            user += "\n"
        prompt = PromptPair(prompt.template_id, prompt.system_text, user + negative_weight_reminder(), prompt.decoding)
    return parse_score_justification(client.complete(prompt))


def judge_presentation(
    report: str, question_index: int, client: JudgeClient, question: str = ""
) -> int:
    """Binary presentation verdict for bank question j; -1 allowed only where the
    bank marks the question N/A-capable."""
    bank = presentation_questions()
    if not 1 <= question_index <= len(bank):
        raise ConfigError(f"presentation question index {question_index} out of range")
    pq = bank[question_index - 1]
    prompt = render_prompt(
        client.config.template_for("presentation"),
        {"question": question, "report": report, "criterion": pq.text},
        Decoding(temperature=0.0, max_tokens=client.config.max_tokens),
    )
    value, _ = parse_presentation_verdict(client.complete(prompt))
    if value == -1 and not pq.na_allowed:
        raise JudgeFormatError(f"-1 returned for presentation question p{question_index}, which is not N/A-capable")
    return value


def extract_claims(report: str, section: Section, client: JudgeClient) -> list[dict]:
    """Atomic claims with their cited URLs for one highlighted section."""
    prompt = render_prompt(
        client.config.template_for("claim_extraction"),
        {"report": report, "highlighted_section": section.text},
        Decoding(temperature=0.0, max_tokens=client.config.max_tokens),
    )
    return parse_claim_list(client.complete(prompt))


def judge_claim_support(claim: str, evidence: str, client: JudgeClient) -> str:
    prompt = render_prompt(
        client.config.template_for("support"),
        {"url_content": evidence, "claim": claim},
        Decoding(temperature=0.0, max_tokens=client.config.max_tokens),
    )
    return parse_support_label(client.complete(prompt))


def judge_format_incorporation(
    question: Question, report_prev: str, report_new: str, feedback: str, client: JudgeClient
) -> float:
    prompt = render_prompt(
        client.config.template_for("pairwise_format"),
        {
            "question": question.prompt_text,
            "report": report_prev,
            "revised_report": report_new,
            "feedback": feedback,
        },
        Decoding(temperature=0.0, max_tokens=client.config.max_tokens),
    )
    return parse_pairwise_score(client.complete(prompt))
