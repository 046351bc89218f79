"""Result tables from run logs: markdown (percentage points, 1 decimal,
signed deltas vs turn 1) and CSV (full precision, long format)."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .errors import ConfigError
from .metrics import aggregate
from .runlog import SCHEMA_VERSION, RUN_FILE

MAIN_METRICS = ["cov", "fa", "gr", "pre"]
REVISION_METRICS = ["inc", "brk"]
_LABELS = {"cov": "Cov", "fa": "Fa", "gr": "Gr", "pre": "Pre", "inc": "Inc", "brk": "Brk"}


def load_rows(paths: list[str | Path]) -> list[dict]:
    """Load rows from run.jsonl files (or run dirs); schema versions must match."""
    rows: list[dict] = []
    versions: dict[int, list[str]] = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            p = p / RUN_FILE
        with p.open(encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                versions.setdefault(row.get("schema_version"), []).append(str(p))
                rows.append(row)
    if len(versions) > 1:
        listing = "; ".join(f"v{v}: {sorted(set(fs))}" for v, fs in sorted(versions.items(), key=lambda kv: str(kv[0])))
        raise ConfigError(f"mixed run-log schema versions: {listing}")
    if versions and next(iter(versions)) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {next(iter(versions))}")
    return rows


def _flat_records(rows: list[dict]) -> list[dict]:
    records = []
    for row in rows:
        rec = {
            "agent": row["agent_id"],
            "dataset": row["dataset"],
            "feedback": row["feedback_kind"],
            "turn": row["turn"],
        }
        rec.update(row["metrics"])
        records.append(rec)
    return records


def _fmt_pct(value: float | None) -> str:
    return "" if value is None else f"{100 * value:.1f}"


def _fmt_delta(value: float | None) -> str:
    if value is None:
        return ""
    return f"{100 * value:+.1f}"


def render_tables(rows: list[dict]) -> tuple[str, str]:
    """Return (markdown, csv). Turn-1 rows show absolute scores; later turns
    show signed deltas vs the same group's turn 1. Inc/Brk are averaged across
    datasets and reported once per (agent, feedback, turn)."""
    records = _flat_records(rows)
    per_dataset = aggregate(records, ["agent", "feedback", "dataset", "turn"], MAIN_METRICS)
    across = aggregate(records, ["agent", "feedback", "turn"], MAIN_METRICS + REVISION_METRICS)

    def pivot(rows_in, keys):
        table: dict[tuple, dict[str, dict]] = {}
        for r in rows_in:
            table.setdefault(tuple(r[k] for k in keys), {})[r["metric"]] = r
        return table

    ds_cells = pivot(per_dataset, ["agent", "feedback", "dataset", "turn"])
    all_cells = pivot(across, ["agent", "feedback", "turn"])

    md = io.StringIO()
    md.write("| Agent | Feedback | Turn | Dataset | Cov | Fa | Gr | Pre | Inc | Brk |\n")
    md.write("|---|---|---|---|---|---|---|---|---|---|\n")

    def cell(metrics: dict[str, dict], name: str, turn: int, is_delta_row: bool) -> str:
        entry = metrics.get(name)
        if entry is None:
            return ""
        if is_delta_row and "delta_vs_turn1" in entry:
            return _fmt_delta(entry["delta_vs_turn1"])
        if is_delta_row and name in MAIN_METRICS:
            return ""  # no turn-1 baseline for this group
        return _fmt_pct(entry["mean"])

    group_keys = sorted({(k[0], k[1]) for k in ds_cells} | {(k[0], k[1]) for k in all_cells})
    for agent, feedback in group_keys:
        turns = sorted(
            {k[3] for k in ds_cells if k[:2] == (agent, feedback)}
            | {k[2] for k in all_cells if k[:2] == (agent, feedback)}
        )
        for turn in turns:
            is_delta = turn != 1
            datasets = sorted({k[2] for k in ds_cells if (k[0], k[1], k[3]) == (agent, feedback, turn)})
            for dataset in datasets:
                metrics = ds_cells.get((agent, feedback, dataset, turn), {})
                md.write(
                    f"| {agent} | {feedback} | {turn} | {dataset} | "
                    + " | ".join(cell(metrics, m, turn, is_delta) for m in MAIN_METRICS)
                    + " |  |  |\n"
                )
            overall = all_cells.get((agent, feedback, turn), {})
            inc_cell = _fmt_pct(overall["inc"]["mean"]) if "inc" in overall else ""
            brk_cell = _fmt_pct(overall["brk"]["mean"]) if "brk" in overall else ""
            md.write(
                f"| {agent} | {feedback} | {turn} | (all) | "
                + " | ".join(cell(overall, m, turn, is_delta) for m in MAIN_METRICS)
                + f" | {inc_cell} | {brk_cell} |\n"
            )

    buf = io.StringIO()
    fieldnames = [
        "agent", "feedback", "dataset", "turn", "metric",
        "mean", "stderr", "n", "excluded", "delta_vs_turn1",
    ]
    writer = csv.DictWriter(buf, fieldnames=fieldnames)
    writer.writeheader()
    for r in per_dataset:
        writer.writerow({k: r.get(k, "") for k in fieldnames})
    for r in across:
        out = {k: r.get(k, "") for k in fieldnames}
        out["dataset"] = "(all)"
        writer.writerow(out)
    return md.getvalue(), buf.getvalue()
