import json

import pytest

from revbench.errors import ConfigError
from revbench.tables import load_rows, render_tables


def make_row(**overrides):
    row = {
        "schema_version": 1,
        "question_id": "q1",
        "dataset": "dsA",
        "agent_id": "agentX",
        "feedback_kind": "content",
        "k": 1,
        "fix": "none",
        "turn": 1,
        "metrics": {
            "cov": 0.623,
            "fa": 0.5,
            "gr": 0.4,
            "pre": 0.9,
            "inc": None,
            "brk": None,
            "all_history_inc": None,
            "oracle_cov": 0.623,
        },
    }
    row.update({k: v for k, v in overrides.items() if k != "metrics"})
    if "metrics" in overrides:
        row["metrics"] = {**row["metrics"], **overrides["metrics"]}
    return row


class TestRenderTables:
    def test_turn1_absolute_and_turn2_delta(self):
        rows = [
            make_row(),
            make_row(turn=2, metrics={"cov": 0.608, "inc": 0.9, "brk": 0.25}),
        ]
        markdown, csv_text = render_tables(rows)
        assert "62.3" in markdown
        assert "-1.5" in markdown
        assert "90.0" in markdown and "25.0" in markdown  # inc/brk absolute
        assert "delta_vs_turn1" in csv_text

    def test_single_turn_no_delta_rows(self):
        markdown, _ = render_tables([make_row()])
        assert "+" not in markdown.replace("|+|", "")
        assert "62.3" in markdown

    def test_inc_brk_averaged_across_datasets(self):
        rows = [
            make_row(dataset="dsA"),
            make_row(dataset="dsB", metrics={"cov": 0.4}),
            make_row(turn=2, dataset="dsA", metrics={"cov": 0.7, "inc": 1.0, "brk": 0.0}),
            make_row(turn=2, dataset="dsB", metrics={"cov": 0.5, "inc": 0.5, "brk": 0.5}),
        ]
        markdown, _ = render_tables(rows)
        all_rows = [ln for ln in markdown.splitlines() if "| (all) |" in ln]
        assert len(all_rows) == 2
        turn2 = next(ln for ln in all_rows if "| 2 |" in ln)
        assert "75.0" in turn2 and "25.0" in turn2  # mean of inc / brk across datasets

    def test_positive_delta_signed(self):
        rows = [make_row(), make_row(turn=2, metrics={"cov": 0.66})]
        markdown, _ = render_tables(rows)
        assert "+3.7" in markdown

    def test_csv_full_precision(self):
        rows = [make_row(metrics={"cov": 0.123456789})]
        _, csv_text = render_tables(rows)
        assert "0.123456789" in csv_text


class TestLoadRows:
    def test_mixed_schema_versions_rejected(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        a.write_text(json.dumps(make_row()) + "\n")
        row = make_row()
        row["schema_version"] = 2
        b.write_text(json.dumps(row) + "\n")
        with pytest.raises(ConfigError, match="mixed run-log schema versions"):
            load_rows([a, b])

    def test_directory_path_resolves_run_file(self, tmp_path):
        run_dir = tmp_path / "run"
        run_dir.mkdir()
        (run_dir / "run.jsonl").write_text(json.dumps(make_row()) + "\n")
        assert len(load_rows([run_dir])) == 1
