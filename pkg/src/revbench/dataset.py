"""Dataset loading, canonical content hashing, and core-set construction.

File schema (one JSON file per dataset):

    {"name": str,
     "questions": [{"id": str, "prompt": str,
                    "criteria": [{"id": str, "text": str, "weight": number}]}]}

Per-criterion "score" is accepted as a weight alias (RigorousBench exports
label a score per criterion which doubles as its weight). Criteria without
any weight default to 1.0. A per-question "dataset" tag is accepted on input
and emitted by the core-set writer so merged files keep their source labels.
"""

from __future__ import annotations

import hashlib
import json
import random
from pathlib import Path

from .errors import DatasetError
from .model import (
    Checklist,
    Criterion,
    Dataset,
    Provenance,
    Question,
    ScoreVector,
    SourceDataset,
    ideal_score,
)


def _norm_ws(text: str) -> str:
    return " ".join(text.split())


def _canonical_records(name: str, questions) -> str:
    records = {
        "name": _norm_ws(name),
        "questions": [
            {
                "id": q.id,
                "prompt": _norm_ws(q.prompt_text),
                "criteria": [
                    {"id": c.id, "text": _norm_ws(c.text), "weight": c.weight}
                    for c in q.checklist
                ],
            }
            for q in questions
        ],
    }
    return json.dumps(records, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def content_hash(name: str, questions) -> str:
    """Hash over canonicalized records so provenance survives re-serialization."""
    return hashlib.sha256(_canonical_records(name, questions).encode("utf-8")).hexdigest()


def _parse_criterion(raw: dict, locus: str, source: SourceDataset) -> Criterion:
    if not isinstance(raw, dict):
        raise DatasetError(f"{locus}: criterion record is not an object")
    cid = raw.get("id")
    text = raw.get("text")
    if not cid or not isinstance(cid, str):
        raise DatasetError(f"{locus}: criterion is missing a string 'id'")
    if not text or not isinstance(text, str):
        raise DatasetError(f"{locus}: criterion {cid!r} is missing 'text'")
    weight = raw.get("weight", raw.get("score", 1.0))
    if not isinstance(weight, (int, float)) or isinstance(weight, bool):
        raise DatasetError(f"{locus}: criterion {cid!r} has non-numeric weight {weight!r}")
    if float(weight) == 0.0:
        raise DatasetError(f"{locus}: criterion {cid!r} has zero weight")
    return Criterion(id=cid, text=text, weight=float(weight), source_dataset=source)


def load_dataset(path: str | Path, format: str = "json") -> Dataset:
    """Load and validate one dataset file. Raises DatasetError with a record locus."""
    if format != "json":
        raise DatasetError(f"unknown dataset format {format!r}")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed JSON at line {exc.lineno} col {exc.colno}: {exc.msg}") from exc

    if not isinstance(raw, dict) or "questions" not in raw:
        raise DatasetError(f"{path}: top-level object must contain 'questions'")
    name = raw.get("name") or path.stem
    default_source = SourceDataset.classify(name)

    raw_questions = raw["questions"]
    if not isinstance(raw_questions, list) or not raw_questions:
        raise DatasetError(f"{path}: 'questions' must be a non-empty list")

    questions: list[Question] = []
    seen_ids: set[str] = set()
    for idx, rq in enumerate(raw_questions):
        locus = f"{path}: question[{idx}]"
        if not isinstance(rq, dict):
            raise DatasetError(f"{locus}: not an object")
        qid = rq.get("id")
        if not qid or not isinstance(qid, str):
            raise DatasetError(f"{locus}: missing string 'id'")
        if qid in seen_ids:
            raise DatasetError(f"{locus}: duplicate question id {qid!r}")
        seen_ids.add(qid)
        prompt = rq.get("prompt")
        if not prompt or not isinstance(prompt, str):
            raise DatasetError(f"{locus}: question {qid!r} is missing 'prompt'")
        raw_criteria = rq.get("criteria")
        if not isinstance(raw_criteria, list):
            raise DatasetError(f"{locus}: question {qid!r} is missing 'criteria'")
        source = SourceDataset.classify(rq["dataset"]) if rq.get("dataset") else default_source
        criteria = tuple(
            _parse_criterion(rc, f"{locus}.criteria[{j}]", source)
            for j, rc in enumerate(raw_criteria)
        )
        try:
            checklist = Checklist(question_id=qid, criteria=criteria)
        except DatasetError as exc:
            raise DatasetError(f"{locus}: {exc}") from exc
        questions.append(Question(id=qid, prompt_text=prompt, checklist=checklist, dataset=source))

    return Dataset(
        name=name,
        questions=tuple(questions),
        provenance=Provenance(str(path), content_hash(name, questions)),
    )


def dataset_to_jsonable(dataset: Dataset) -> dict:
    return {
        "name": dataset.name,
        "questions": [
            {
                "id": q.id,
                "prompt": q.prompt_text,
                "dataset": q.dataset.value,
                "criteria": [
                    {"id": c.id, "text": c.text, "weight": c.weight} for c in q.checklist
                ],
            }
            for q in dataset
        ],
    }


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(dataset_to_jsonable(dataset), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def n_failed_criteria(checklist: Checklist, scores: ScoreVector) -> int:
    """Count criteria whose score is not at the ideal for their weight sign."""
    return sum(1 for c in checklist if scores.score_of(c.id) != ideal_score(c))


def build_core_set(
    datasets: list[Dataset],
    initial_evals: dict[str, dict[str, ScoreVector]],
    per_dataset_n: int,
    min_failed: int,
    seed: int,
) -> Dataset:
    """Uniformly sample per_dataset_n questions per dataset among those where
    every agent leaves at least `min_failed` criteria off their ideal score.

    Deterministic under `seed`. Raises DatasetError when any eligible pool is
    smaller than per_dataset_n, reporting the pool size per dataset.
    """
    if min_failed < 1:
        raise DatasetError("min_failed must be >= 1")
    if not initial_evals:
        raise DatasetError("initial_evals must cover at least one agent")

    for agent_id, per_question in initial_evals.items():
        for ds in datasets:
            for q in ds:
                if q.id not in per_question:
                    raise DatasetError(
                        f"initial_evals missing entry for agent {agent_id!r}, question {q.id!r}"
                    )

    rng = random.Random(seed)
    picked: list[Question] = []
    shortfalls: list[str] = []
    for ds in datasets:
        eligible = [
            q
            for q in ds
            if all(
                n_failed_criteria(q.checklist, initial_evals[agent][q.id]) >= min_failed
                for agent in initial_evals
            )
        ]
        if len(eligible) < per_dataset_n:
            shortfalls.append(f"{ds.name}: eligible pool {len(eligible)} < {per_dataset_n}")
            continue
        chosen = rng.sample(eligible, per_dataset_n)
        picked.extend(sorted(chosen, key=lambda q: q.id))
    if shortfalls:
        raise DatasetError("core set infeasible: " + "; ".join(shortfalls))

    name = "core-set"
    return Dataset(
        name=name,
        questions=tuple(picked),
        provenance=Provenance(
            f"core_set(seed={seed},n={per_dataset_n},min_failed={min_failed})",
            content_hash(name, picked),
        ),
    )
