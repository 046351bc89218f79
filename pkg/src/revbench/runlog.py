"""Run-log persistence: append-only JSONL (one row per session turn) plus a
run manifest carrying config, seeds, and prompt-asset hashes.

Rows store everything needed to recompute metrics offline: the full score
vector with criterion weights, factuality counts, the presentation vector,
and the turn's target set. replay_rows() recomputes each stored metric and
reports mismatches.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from .metrics import (
    FactualityCounts,
    TargetEntry,
    TargetSet,
    all_history_incorporation,
    break_rate,
    coverage_score,
    factuality_scores,
    incorporation_content,
    presentation_score,
)
from .model import Checklist, Criterion, ScoreVector
from .templates import asset_hashes
from .session import SessionRecord, TurnRecord

SCHEMA_VERSION = 1
RUN_FILE = "run.jsonl"
MANIFEST_FILE = "run_manifest.json"
PARTIAL_MARKER = "PARTIAL"

TIMESTAMP_KEYS = ("ts", "created_at")


def _targets_jsonable(ts: TargetSet | None) -> dict | None:
    if ts is None:
        return None
    return {
        "turn": ts.turn,
        "short_pool": ts.short_pool,
        "entries": [
            {
                "criterion_id": e.criterion_id,
                "score": e.score,
                "justification": e.justification,
                "weight": e.weight,
            }
            for e in ts.entries
        ],
    }


def targets_from_jsonable(data: dict | None) -> TargetSet | None:
    if data is None:
        return None
    return TargetSet(
        turn=data["turn"],
        entries=tuple(
            TargetEntry(e["criterion_id"], e["score"], e["justification"], e["weight"])
            for e in data["entries"]
        ),
        short_pool=data.get("short_pool", False),
    )


def turn_row(record: SessionRecord, turn: TurnRecord, weights: dict[str, float]) -> dict:
    feedback = turn.feedback
    return {
        "schema_version": SCHEMA_VERSION,
        "question_id": record.question_id,
        "dataset": record.dataset,
        "agent_id": record.agent_id,
        "feedback_kind": record.protocol.feedback_kind,
        "k": record.protocol.k,
        "fix": record.protocol.fix,
        "max_turns": record.protocol.max_turns,
        "seeds": record.seeds,
        "config_hash": record.config_hash,
        "turn": turn.turn,
        "report": turn.report,
        "feedback": None
        if feedback is None
        else {
            "kind": feedback.kind,
            "text": feedback.text,
            "targets": _targets_jsonable(feedback.targets),
            "offered_seed_ids": list(feedback.offered_seed_ids or []) or None,
            "provenance": feedback.provenance,
        },
        "delivered_feedback": turn.delivered_feedback,
        "refined_feedback": turn.refined_feedback,
        "scores": turn.evaluation.scores.to_jsonable(),
        "weights": weights,
        "counts": asdict(turn.evaluation.counts),
        "flags": turn.evaluation.counts.flags,
        "presentation": list(turn.evaluation.presentation),
        "claims": turn.evaluation.claims,
        "metrics": {
            "cov": turn.cov,
            "fa": turn.fa,
            "gr": turn.gr,
            "pre": turn.pre,
            "inc": turn.inc,
            "brk": turn.brk,
            "all_history_inc": turn.all_history_inc,
            "oracle_cov": turn.oracle_cov,
        },
        "failed": turn.failed,
        "failure_reason": turn.failure_reason,
        "reviser": turn.reviser_summary,
        "errors": list(turn.evaluation.errors),
        "diagnostics": list(turn.evaluation.diagnostics),
        "end_reason": record.end_reason,
        "ts": turn.ts,
    }


@dataclass
class RunWriter:
    out_dir: Path

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._run_path = self.out_dir / RUN_FILE

    def write_manifest(self, config: dict, seeds: dict) -> None:
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "config": config,
            "seeds": seeds,
            "asset_hashes": asset_hashes(),
            "created_at": time.time(),
        }
        (self.out_dir / MANIFEST_FILE).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def write_session(self, record: SessionRecord, weights: dict[str, float]) -> None:
        try:
            with self._run_path.open("a", encoding="utf-8") as f:
                for turn in record.turns:
                    f.write(json.dumps(turn_row(record, turn, weights), sort_keys=True) + "\n")
        except OSError:
            (self.out_dir / PARTIAL_MARKER).write_text("run log write failed\n")
            raise


def persist_run(records, out_dir: str | Path, config: dict, seeds: dict) -> Path:
    """Write the manifest once, then one JSONL row per session turn."""
    writer = RunWriter(Path(out_dir))
    writer.write_manifest(config, seeds)
    for record, weights in records:
        writer.write_session(record, weights)
    return writer.out_dir


def load_run(out_dir: str | Path) -> tuple[dict, list[dict], list[str]]:
    """Load (manifest, rows, warnings); warns when prompt assets changed."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / MANIFEST_FILE).read_text(encoding="utf-8"))
    rows = []
    with (out_dir / RUN_FILE).open(encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    warnings = []
    current = asset_hashes()
    for name, digest in manifest.get("asset_hashes", {}).items():
        if current.get(name) != digest:
            warnings.append(f"prompt asset changed since this run: {name}")
    if (out_dir / PARTIAL_MARKER).exists():
        warnings.append("run log is marked partial")
    return manifest, rows, warnings


def _row_checklist(row: dict) -> Checklist:
    criteria = tuple(
        Criterion(id=cid, text=cid, weight=w) for cid, w in sorted(row["weights"].items())
    )
    return Checklist(question_id=row["question_id"], criteria=criteria)


def replay_rows(rows: list[dict]) -> list[str]:
    """Recompute every stored metric from raw verdicts; return mismatch notes."""
    mismatches: list[str] = []
    by_session: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (
            row["agent_id"],
            row["question_id"],
            row["feedback_kind"],
            row["fix"],
            json.dumps(row.get("seeds", {}), sort_keys=True),
        )
        by_session.setdefault(key, []).append(row)

    for key, session_rows in by_session.items():
        session_rows.sort(key=lambda r: r["turn"])
        checklist = _row_checklist(session_rows[0])
        prev_scores: ScoreVector | None = None
        target_history: list[TargetSet] = []
        for row in session_rows:
            loc = f"{key[0]}/{key[1]}/t{row['turn']}"
            scores = ScoreVector.from_jsonable(row["scores"])
            counts = FactualityCounts(**row["counts"])
            stored = row["metrics"]

            def check(name: str, value):
                got = None if value is None else float(value)
                if stored.get(name) != got:
                    mismatches.append(f"{loc}: {name} stored={stored.get(name)} recomputed={got}")

            check("cov", coverage_score(checklist, scores))
            fa, gr = factuality_scores(counts)
            check("fa", fa)
            check("gr", gr)
            check("pre", presentation_score(row["presentation"]))
            targets = targets_from_jsonable((row.get("feedback") or {}).get("targets"))
            if targets is not None:
                target_history.append(targets)
                check("inc", incorporation_content(targets, scores))
                check("all_history_inc", all_history_incorporation(target_history, scores))
            if prev_scores is not None:
                check("brk", break_rate(checklist, prev_scores, scores))
            prev_scores = scores
    return mismatches
