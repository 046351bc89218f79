"""Core domain model: checklists, questions, datasets, and ternary score vectors.

Everything here is immutable after construction and safe to share across
threads. Scores are ternary (0, 0.5, 1); weights are signed reals where a
negative weight marks content the report must avoid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import DatasetError

TERNARY = (0.0, 0.5, 1.0)


def validate_ternary(value: float) -> float:
    """Return `value` as one of 0.0/0.5/1.0, rejecting anything else."""
    v = float(value)
    if v not in TERNARY:
        raise ValueError(f"score must be one of {TERNARY}, got {value!r}")
    return v


class SourceDataset(str, enum.Enum):
    RESEARCH_RUBRICS = "ResearchRubrics"
    RIGOROUS_BENCH = "RigorousBench"
    RESEARCHER_BENCH = "ResearcherBench"
    CUSTOM = "Custom"

    @classmethod
    def classify(cls, name: str) -> "SourceDataset":
        for member in cls:
            if member.value.lower() == name.strip().lower():
                return member
        return cls.CUSTOM


@dataclass(frozen=True)
class Criterion:
    """One weighted rubric item. Positive weight: must cover; negative: must avoid."""

    id: str
    text: str
    weight: float = 1.0
    source_dataset: SourceDataset = SourceDataset.CUSTOM

    def __post_init__(self):
        if not self.id:
            raise DatasetError("criterion id must be non-empty")
        if self.weight == 0:
            raise DatasetError(f"criterion {self.id!r} has zero weight")


def ideal_score(criterion: Criterion) -> float:
    """The best achievable ternary score: 1 for positive weight, 0 for negative."""
    return 1.0 if criterion.weight > 0 else 0.0


@dataclass(frozen=True)
class Checklist:
    """Ordered criteria for one question.

    Must contain at least one positive-weight criterion, otherwise the
    coverage denominator would be zero; such checklists are rejected at load.
    """

    question_id: str
    criteria: tuple[Criterion, ...]

    def __post_init__(self):
        if not self.criteria:
            raise DatasetError(f"checklist for {self.question_id!r} is empty")
        seen: set[str] = set()
        for c in self.criteria:
            if c.id in seen:
                raise DatasetError(
                    f"checklist for {self.question_id!r} has duplicate criterion id {c.id!r}"
                )
            seen.add(c.id)
        if not any(c.weight > 0 for c in self.criteria):
            raise DatasetError(
                f"checklist for {self.question_id!r} has no positive-weight criterion"
            )

    def __iter__(self):
        return iter(self.criteria)

    def __len__(self) -> int:
        return len(self.criteria)

    def criterion_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.criteria)

    def get(self, criterion_id: str) -> Criterion:
        for c in self.criteria:
            if c.id == criterion_id:
                return c
        raise KeyError(criterion_id)


@dataclass(frozen=True)
class Question:
    id: str
    prompt_text: str
    checklist: Checklist
    dataset: SourceDataset = SourceDataset.CUSTOM

    def __post_init__(self):
        if not self.prompt_text:
            raise DatasetError(f"question {self.id!r} has empty prompt")
        if self.checklist.question_id != self.id:
            raise DatasetError(
                f"checklist question_id {self.checklist.question_id!r} != question id {self.id!r}"
            )


@dataclass(frozen=True)
class Provenance:
    source_path: str
    content_hash: str


@dataclass(frozen=True)
class Dataset:
    name: str
    questions: tuple[Question, ...]
    provenance: Provenance

    def __post_init__(self):
        seen: set[str] = set()
        for q in self.questions:
            if q.id in seen:
                raise DatasetError(f"duplicate question id {q.id!r}")
            seen.add(q.id)

    def __iter__(self):
        return iter(self.questions)

    def __len__(self) -> int:
        return len(self.questions)

    def get(self, question_id: str) -> Question:
        for q in self.questions:
            if q.id == question_id:
                return q
        raise KeyError(question_id)


@dataclass(frozen=True)
class CriterionScore:
    """Ternary verdict for one criterion, with the judge's justification."""

    score: float
    justification: str = ""

    def __post_init__(self):
        object.__setattr__(self, "score", validate_ternary(self.score))


@dataclass(frozen=True)
class ScoreVector:
    """Per-criterion coverage verdicts for one report draft."""

    entries: dict[str, CriterionScore] = field(default_factory=dict)

    def score_of(self, criterion_id: str) -> float:
        return self.entries[criterion_id].score

    def justification_of(self, criterion_id: str) -> str:
        return self.entries[criterion_id].justification

    def validate_against(self, checklist: Checklist) -> None:
        expected = set(checklist.criterion_ids())
        got = set(self.entries)
        if expected != got:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ValueError(
                f"score vector does not match checklist (missing={missing}, extra={extra})"
            )

    def to_jsonable(self) -> dict:
        return {
            cid: {"score": cs.score, "justification": cs.justification}
            for cid, cs in self.entries.items()
        }

    @classmethod
    def from_jsonable(cls, data: dict) -> "ScoreVector":
        return cls(
            {
                cid: CriterionScore(rec["score"], rec.get("justification", ""))
                for cid, rec in data.items()
            }
        )
