"""End-to-end session orchestration: per-report evaluation, the multi-turn
revision loop with simulated feedback and optional fixes, and per-turn
metric assembly.

Failure policy: a single judge verdict never fails an evaluation (fallbacks:
coverage 0, presentation 0, support "insufficient", all flagged); an adapter
crash or timeout truncates the session with a reason; a reviser timeout keeps
the previous report and marks the turn failed but the session continues.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .agents import SYNTHETIC, AgentAdapter, invoke_agent, transcript_payload
from .errors import AdapterError, JudgeFormatError, ReviserTimeout, TransportError
from .evidence import Fetcher, gather_evidence
from .feedback import (
    CONTENT,
    FORMAT,
    REFLECT,
    Feedback,
    reflect_feedback,
    sample_content_targets,
    simulate_content_feedback,
    simulate_format_feedback,
)
from .fixes import ReviserLimits, SearchConfig, refine_feedback_pe, run_reviser
from .judging import (
    JudgeClient,
    extract_claims,
    judge_claim_support,
    judge_coverage,
    judge_format_incorporation,
    judge_presentation,
)
from .metrics import (
    FactualityCounts,
    TargetSet,
    all_history_incorporation,
    break_rate,
    coverage_score,
    factuality_scores,
    incorporation_content,
    oracle_trajectory,
    presentation_score,
)
from .model import CriterionScore, Question, ScoreVector
from .templates import FormatSeed, presentation_questions
from .reportparse import scan_citations, split_sections
from .synthetic import SyntheticAgent, SyntheticBehavior

_JUDGE_ERRORS = (JudgeFormatError, TransportError)


@dataclass(frozen=True)
class SessionProtocol:
    feedback_kind: str = REFLECT
    k: int = 1
    max_turns: int = 1
    fix: str = "none"  # none | pe | reviser

    def __post_init__(self):
        if self.feedback_kind not in (CONTENT, FORMAT, REFLECT):
            raise ValueError(f"unknown feedback kind {self.feedback_kind!r}")
        if self.fix not in ("none", "pe", "reviser"):
            raise ValueError(f"unknown fix {self.fix!r}")
        if self.max_turns < 1 or self.k < 1:
            raise ValueError("max_turns and k must be >= 1")


@dataclass
class ReportEvaluation:
    scores: ScoreVector
    counts: FactualityCounts
    presentation: list[int]
    claims: list[dict]  # {"claim", "urls", "label"}
    errors: list[str]
    diagnostics: list[str]


@dataclass
class TurnRecord:
    turn: int
    report: str
    feedback: Feedback | None
    delivered_feedback: str | None
    evaluation: ReportEvaluation
    cov: float
    fa: float
    gr: float
    pre: float
    inc: float | None
    brk: float | None
    all_history_inc: float | None
    oracle_cov: float
    failed: bool = False
    failure_reason: str = ""
    reviser_summary: dict | None = None
    refined_feedback: dict | None = None
    ts: float = field(default_factory=time.time)


@dataclass
class SessionRecord:
    question_id: str
    dataset: str
    agent_id: str
    protocol: SessionProtocol
    seeds: dict[str, int]
    config_hash: str
    turns: list[TurnRecord] = field(default_factory=list)
    end_reason: str = "completed"


def _map_maybe_parallel(fn, items, parallelism: int):
    if parallelism <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


def evaluate_report(
    question: Question,
    report: str,
    judges: JudgeClient,
    fetcher: Fetcher,
) -> ReportEvaluation:
    """Coverage over all criteria, the factuality pipeline, and the 10
    presentation judgements for one report draft."""
    errors: list[str] = []
    parallelism = judges.config.parallelism

    scan = scan_citations(report)
    diagnostics = list(scan.diagnostics)

    def cover(criterion) -> tuple[str, CriterionScore]:
        try:
            score, justification = judge_coverage(question, report, criterion, judges)
        except _JUDGE_ERRORS as exc:
            errors.append(f"coverage:{criterion.id}: {exc}")
            return criterion.id, CriterionScore(0.0, f"judge error: {exc}")
        return criterion.id, CriterionScore(score, justification)

    scores = ScoreVector(dict(_map_maybe_parallel(cover, list(question.checklist), parallelism)))

    def present(index: int) -> int:
        try:
            return judge_presentation(report, index, judges, question=question.prompt_text)
        except _JUDGE_ERRORS as exc:
            errors.append(f"presentation:p{index}: {exc}")
            return 0

    presentation = _map_maybe_parallel(
        present, [pq.index for pq in presentation_questions()], parallelism
    )

    sections = split_sections(report)

    def extract(section) -> list[dict]:
        try:
            return extract_claims(report, section, judges)
        except _JUDGE_ERRORS as exc:
            errors.append(f"claims:section{section.index}: {exc}")
            return []

    claims: list[dict] = []
    for section_claims in _map_maybe_parallel(extract, sections, parallelism):
        claims.extend(section_claims)

    def support(claim: dict) -> str:
        if not claim["urls"]:
            return "insufficient"  # uncited claims are unverifiable; no judge call
        bundle = gather_evidence(claim["claim"], claim["urls"], fetcher, judges)
        try:
            return judge_claim_support(claim["claim"], bundle.assembled_text, judges)
        except _JUDGE_ERRORS as exc:
            errors.append(f"support:{claim['claim'][:40]!r}: {exc}")
            return "insufficient"

    labels = _map_maybe_parallel(support, claims, parallelism)
    for claim, label in zip(claims, labels):
        claim["label"] = label

    counts = FactualityCounts(
        n_claims=len(claims),
        n_cited=sum(1 for c in claims if c["urls"]),
        n_supported=sum(1 for c in claims if c["label"] == "supported"),
        n_citations=sum(len(c["urls"]) for c in claims),
    )
    if not scan.mentions and counts.n_cited == 0:
        diagnostics.append("no citation markers detected anywhere in the report")
    errors.sort()  # worker completion order must not leak into the run log
    return ReportEvaluation(scores, counts, presentation, claims, errors, diagnostics)


def _opt_float(value: Fraction | float | None) -> float | None:
    return None if value is None else float(value)


@dataclass
class SessionContext:
    """Shared clients and knobs for running sessions."""

    judges: JudgeClient
    fetcher: Fetcher
    reviser_backend: object | None = None
    reviser_model: str = "qwen3-30b-a3b-instruct"
    reviser_limits: ReviserLimits = field(default_factory=ReviserLimits)
    search: SearchConfig | None = None
    seed_bank: tuple[FormatSeed, ...] | None = None
    behavior: SyntheticBehavior | None = None


def derive_seed(master: int, *scope: str) -> int:
    digest = hashlib.sha256((":".join([str(master), *scope])).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def config_hash(protocol: SessionProtocol, judge_model: str, agent_id: str) -> str:
    payload = json.dumps(
        {
            "feedback_kind": protocol.feedback_kind,
            "k": protocol.k,
            "max_turns": protocol.max_turns,
            "fix": protocol.fix,
            "judge_model": judge_model,
            "agent": agent_id,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def _turn_metrics(
    question: Question,
    evaluation: ReportEvaluation,
) -> tuple[float, float, float, float]:
    cov = float(coverage_score(question.checklist, evaluation.scores))
    fa, gr = factuality_scores(evaluation.counts)
    pre = float(presentation_score(evaluation.presentation))
    return cov, float(fa), float(gr), pre


def run_session(
    question: Question,
    adapter: AgentAdapter,
    protocol: SessionProtocol,
    context: SessionContext,
    master_seed: int = 0,
) -> SessionRecord:
    """Drive one question through up to max_turns of feedback and revision."""
    feedback_rng = random.Random(derive_seed(master_seed, question.id, "feedback"))
    agent_seed = derive_seed(master_seed, question.id, "agent")
    seeds = {"master": master_seed, "agent": agent_seed}

    record = SessionRecord(
        question_id=question.id,
        dataset=question.dataset.value,
        agent_id=adapter.agent_id,
        protocol=protocol,
        seeds=seeds,
        config_hash=config_hash(protocol, context.judges.config.model, adapter.agent_id),
    )

    synthetic_agent: SyntheticAgent | None = None
    if adapter.kind == SYNTHETIC:
        behavior = context.behavior or SyntheticBehavior()
        synthetic_agent = SyntheticAgent(behavior, question, seed=agent_seed)

    history: list[tuple[str, str]] = []  # (report, delivered feedback) pairs
    target_history: list[TargetSet] = []

    def agent_turn(feedback_obj: Feedback | None) -> str:
        if synthetic_agent is not None:
            return synthetic_agent.step(feedback_obj)
        return invoke_agent(adapter, transcript_payload(question.prompt_text, history))

    # turn 1
    try:
        report = agent_turn(None)
    except AdapterError as exc:
        record.end_reason = f"adapter_failure: {exc}"
        return record
    evaluation = evaluate_report(question, report, context.judges, context.fetcher)
    cov, fa, gr, pre = _turn_metrics(question, evaluation)
    turn1_scores = evaluation.scores
    record.turns.append(
        TurnRecord(
            turn=1,
            report=report,
            feedback=None,
            delivered_feedback=None,
            evaluation=evaluation,
            cov=cov,
            fa=fa,
            gr=gr,
            pre=pre,
            inc=None,
            brk=None,
            all_history_inc=None,
            oracle_cov=cov,
        )
    )

    for turn in range(2, protocol.max_turns + 1):
        prev = record.turns[-1]

        if protocol.feedback_kind == CONTENT:
            targets = sample_content_targets(
                question.checklist, prev.evaluation.scores, protocol.k, feedback_rng, turn=turn
            )
            if targets is None:
                record.end_reason = "no_feedback"
                return record
            feedback = simulate_content_feedback(question, targets, context.judges)
            target_history.append(targets)
        elif protocol.feedback_kind == FORMAT:
            feedback = simulate_format_feedback(
                question, prev.report, feedback_rng, context.judges, context.seed_bank
            )
        else:
            feedback = reflect_feedback()

        delivered = feedback.text
        refined_info = None
        if protocol.fix == "pe":
            refined = refine_feedback_pe(
                question.prompt_text, prev.report, feedback.text, context.judges
            )
            delivered = refined.final_text
            refined_info = {"edit_plan": refined.edit_plan, "final_text": refined.final_text}

        failed = False
        failure_reason = ""
        reviser_summary = None
        if protocol.fix == "reviser":
            backend = context.reviser_backend or context.judges.backend
            try:
                report, transcript = run_reviser(
                    question.prompt_text,
                    prev.report,
                    delivered,
                    backend,
                    model=context.reviser_model,
                    search=context.search,
                    limits=context.reviser_limits,
                )
                reviser_summary = {
                    "search_calls_used": transcript.search_calls_used,
                    "finalized_by": transcript.finalized_by,
                    "n_turns": len(transcript.turns),
                }
            except (ReviserTimeout, TransportError) as exc:
                report = prev.report
                failed = True
                failure_reason = f"reviser: {exc}"
        else:
            history.append((prev.report, delivered))
            try:
                report = agent_turn(feedback)
            except AdapterError as exc:
                record.end_reason = f"adapter_failure: {exc}"
                return record

        evaluation = evaluate_report(question, report, context.judges, context.fetcher)
        cov, fa, gr, pre = _turn_metrics(question, evaluation)

        if protocol.feedback_kind == CONTENT:
            inc = _opt_float(incorporation_content(feedback.targets, evaluation.scores))
            ahi = _opt_float(all_history_incorporation(target_history, evaluation.scores))
        elif protocol.feedback_kind == FORMAT:
            try:
                inc = judge_format_incorporation(
                    question, prev.report, report, feedback.text, context.judges
                )
            except _JUDGE_ERRORS as exc:
                evaluation.errors.append(f"format_incorporation: {exc}")
                inc = None
            ahi = None
        else:
            inc = None
            ahi = None
        brk = _opt_float(break_rate(question.checklist, prev.evaluation.scores, evaluation.scores))
        trajectory = oracle_trajectory(turn1_scores, target_history, question.checklist)
        oracle_cov = float(trajectory[-1])

        record.turns.append(
            TurnRecord(
                turn=turn,
                report=report,
                feedback=feedback,
                delivered_feedback=delivered,
                evaluation=evaluation,
                cov=cov,
                fa=fa,
                gr=gr,
                pre=pre,
                inc=inc,
                brk=brk,
                all_history_inc=ahi,
                oracle_cov=oracle_cov,
                failed=failed,
                failure_reason=failure_reason,
                reviser_summary=reviser_summary,
                refined_feedback=refined_info,
            )
        )
    return record
