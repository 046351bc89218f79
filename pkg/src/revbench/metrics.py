"""Pure computation of coverage, factuality, presentation, and revision metrics.

All ratio metrics are computed in exact rational arithmetic (ternary scores
and binary float weights convert to Fraction losslessly), so equivalence
tests against independent oracles need no tolerance. Metrics whose defining
denominator set is empty return None (N/A) and are excluded from aggregation
rather than coerced to zero.

Conventions for a criterion of weight w and ternary score s:
  - ideal score: 1 if w > 0, else 0.
  - coverage numerator sums w*s; the denominator sums only positive weights.
  - "previously achieved" for break rate: (w > 0 and s > 0) or (w < 0 and s < 1).
  - degradation: the weighted contribution w*s decreases between turns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from statistics import stdev

from .model import Checklist, ScoreVector, ideal_score


@dataclass(frozen=True)
class FactualityCounts:
    """Claim bookkeeping for one report draft."""

    n_claims: int
    n_cited: int
    n_supported: int
    n_citations: int

    def __post_init__(self):
        if not 0 <= self.n_supported <= self.n_cited <= self.n_claims:
            raise ValueError(
                f"need 0 <= supported({self.n_supported}) <= cited({self.n_cited})"
                f" <= claims({self.n_claims})"
            )
        if self.n_citations < 0:
            raise ValueError("n_citations must be >= 0")

    @property
    def flags(self) -> dict[str, bool]:
        return {"no_citations": self.n_cited == 0, "no_claims": self.n_claims == 0}


@dataclass(frozen=True)
class TargetEntry:
    """One sampled feedback target with its pre-revision verdict."""

    criterion_id: str
    score: float
    justification: str
    weight: float

    @property
    def ideal(self) -> float:
        return 1.0 if self.weight > 0 else 0.0


@dataclass(frozen=True)
class TargetSet:
    """Criteria targeted by one turn's content feedback."""

    turn: int
    entries: tuple[TargetEntry, ...]
    short_pool: bool = False  # eligible pool was smaller than the requested k

    def criterion_ids(self) -> tuple[str, ...]:
        return tuple(e.criterion_id for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class RevisionMetrics:
    inc: Fraction | None
    brk: Fraction | None
    all_history_inc: Fraction | None
    transitions: tuple[tuple[str, float, float], ...] = ()  # (criterion id, prev, new)


def _frac(x: float) -> Fraction:
    return Fraction(x)


def coverage_score(checklist: Checklist, scores: ScoreVector) -> Fraction:
    """Sum of w*s over all criteria, normalized by the sum of positive weights."""
    scores.validate_against(checklist)
    numerator = Fraction(0)
    denominator = Fraction(0)
    for c in checklist:
        w = _frac(c.weight)
        numerator += w * _frac(scores.score_of(c.id))
        if c.weight > 0:
            denominator += w
    return numerator / denominator


def factuality_scores(counts: FactualityCounts) -> tuple[Fraction, Fraction]:
    """(citation faithfulness, claim groundedness). Empty denominators score 0
    with the corresponding flag raised on `counts`."""
    if counts.n_claims == 0:
        return Fraction(0), Fraction(0)
    gr = Fraction(counts.n_supported, counts.n_claims)
    if counts.n_cited == 0:
        return Fraction(0), gr
    return Fraction(counts.n_supported, counts.n_cited), gr


def presentation_score(judgements: list[int]) -> Fraction:
    """Mean of applicable judgements; -1 (N/A) is legal only at positions 6 and 7."""
    if len(judgements) != 10:
        raise ValueError(f"expected 10 presentation judgements, got {len(judgements)}")
    applicable: list[int] = []
    for j, value in enumerate(judgements, start=1):
        if value not in (-1, 0, 1):
            raise ValueError(f"presentation judgement p{j} out of range: {value!r}")
        if value == -1:
            if j not in (6, 7):
                raise ValueError(f"-1 not allowed at presentation question p{j}")
            continue
        applicable.append(value)
    return Fraction(sum(applicable), len(applicable))


def incorporation_content(targets: TargetSet, scores_t: ScoreVector) -> Fraction | None:
    """Fraction of feedback targets at their ideal score after revision.

    Partial coverage of a positive-weight target counts as not incorporated.
    """
    if len(targets) == 0:
        return None
    hits = sum(1 for e in targets.entries if scores_t.score_of(e.criterion_id) == e.ideal)
    return Fraction(hits, len(targets))


def break_rate(
    checklist: Checklist, scores_prev: ScoreVector, scores_t: ScoreVector
) -> Fraction | None:
    """Fraction of previously achieved criteria whose weighted contribution drops."""
    scores_prev.validate_against(checklist)
    scores_t.validate_against(checklist)
    achieved = [
        c
        for c in checklist
        if (c.weight > 0 and scores_prev.score_of(c.id) > 0)
        or (c.weight < 0 and scores_prev.score_of(c.id) < 1)
    ]
    if not achieved:
        return None
    broken = sum(
        1
        for c in achieved
        if _frac(c.weight) * _frac(scores_t.score_of(c.id))
        < _frac(c.weight) * _frac(scores_prev.score_of(c.id))
    )
    return Fraction(broken, len(achieved))


def all_history_incorporation(
    target_history: list[TargetSet], scores_t: ScoreVector
) -> Fraction | None:
    """Fraction of the union of past feedback targets still at their ideal score."""
    ideal_by_id: dict[str, float] = {}
    for ts in target_history:
        for e in ts.entries:
            ideal_by_id.setdefault(e.criterion_id, e.ideal)
    if not ideal_by_id:
        return None
    hits = sum(1 for cid, ideal in ideal_by_id.items() if scores_t.score_of(cid) == ideal)
    return Fraction(hits, len(ideal_by_id))


def oracle_trajectory(
    scores_turn1: ScoreVector, target_history: list[TargetSet], checklist: Checklist
) -> list[Fraction]:
    """Coverage trajectory under perfect incorporation and zero breakage.

    Starts from the turn-1 scores; each turn sets that turn's actual targets
    to their ideal scores and freezes everything else. Non-decreasing in t.
    """
    scores_turn1.validate_against(checklist)
    state = {cid: cs.score for cid, cs in scores_turn1.entries.items()}

    def cov() -> Fraction:
        num = Fraction(0)
        den = Fraction(0)
        for c in checklist:
            num += _frac(c.weight) * _frac(state[c.id])
            if c.weight > 0:
                den += _frac(c.weight)
        return num / den

    trajectory = [cov()]
    for ts in target_history:
        for e in ts.entries:
            state[e.criterion_id] = ideal_score(checklist.get(e.criterion_id))
        trajectory.append(cov())
    return trajectory


def aggregate(
    per_sample: list[dict],
    grouping: list[str],
    metric_names: list[str],
    baseline_key: str = "turn",
    baseline_value=1,
) -> list[dict]:
    """Mean and standard error per group and metric.

    None values (N/A) are excluded from that metric's mean and counted in
    "excluded". When the grouping includes `baseline_key`, each row also gets
    the signed difference of its mean from the same group's baseline row.
    Empty groups are omitted.
    """
    groups: dict[tuple, dict[str, list[float]]] = {}
    excluded: dict[tuple, dict[str, int]] = {}
    for rec in per_sample:
        key = tuple(rec.get(k) for k in grouping)
        bucket = groups.setdefault(key, {m: [] for m in metric_names})
        excl = excluded.setdefault(key, {m: 0 for m in metric_names})
        for m in metric_names:
            value = rec.get(m)
            if value is None:
                excl[m] += 1
            else:
                bucket[m].append(float(value))

    baseline_means: dict[tuple, dict[str, float]] = {}
    if baseline_key in grouping:
        b_idx = grouping.index(baseline_key)
        for key, bucket in groups.items():
            if key[b_idx] == baseline_value:
                rest = key[:b_idx] + key[b_idx + 1 :]
                baseline_means[rest] = {
                    m: sum(v) / len(v) for m, v in bucket.items() if v
                }

    rows: list[dict] = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        for m in metric_names:
            values = groups[key][m]
            n_excl = excluded[key][m]
            if not values:
                continue
            mean = sum(values) / len(values)
            err = stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0
            row = dict(zip(grouping, key))
            row.update(
                {"metric": m, "mean": mean, "stderr": err, "n": len(values), "excluded": n_excl}
            )
            if baseline_key in grouping:
                b_idx = grouping.index(baseline_key)
                rest = key[:b_idx] + key[b_idx + 1 :]
                base = baseline_means.get(rest, {}).get(m)
                if base is not None and key[b_idx] != baseline_value:
                    row["delta_vs_turn1"] = mean - base
            rows.append(row)
    return rows
