#!/usr/bin/env python3
"""Offline demo: drive the synthetic agent through multi-turn content-feedback
sessions with scripted judges, persist the run log, and print result tables.

Everything is deterministic under --seed; no network access is needed.
"""

import argparse
from pathlib import Path

from revbench.agents import AgentAdapter
from revbench.evidence import Fetcher, ReaderConfig
from revbench.judging import JudgeClient, JudgeConfig
from revbench.runlog import RunWriter
from revbench.session import SessionContext, SessionProtocol, run_session
from revbench.synthetic import (
    SyntheticBehavior,
    SyntheticJudgeBackend,
    stub_reader_transport,
    synthetic_dataset,
)
from revbench.tables import load_rows, render_tables


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/synthetic_demo")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--turns", type=int, default=4)
    parser.add_argument("--sessions", type=int, default=6)
    parser.add_argument("--p-inc", type=float, default=0.85)
    parser.add_argument("--p-break", type=float, default=0.25)
    args = parser.parse_args()

    weights = {f"q{i + 1}": [1.0, 1.0, 2.0, -1.0, 1.0] for i in range(args.sessions)}
    dataset = synthetic_dataset("synthetic-demo", weights)

    context = SessionContext(
        judges=JudgeClient(SyntheticJudgeBackend(), JudgeConfig()),
        fetcher=Fetcher(ReaderConfig(transport=stub_reader_transport)),
        behavior=SyntheticBehavior(p_inc=args.p_inc, p_break=args.p_break, cite_rate=0.7),
    )
    protocol = SessionProtocol(feedback_kind="content", k=1, max_turns=args.turns)
    adapter = AgentAdapter(kind="synthetic", locator="")

    writer = RunWriter(Path(args.out))
    writer.write_manifest(
        config={"demo": True, "p_inc": args.p_inc, "p_break": args.p_break},
        seeds={"master": args.seed},
    )
    for question in dataset:
        record = run_session(question, adapter, protocol, context, master_seed=args.seed)
        writer.write_session(record, {c.id: c.weight for c in question.checklist})
        last = record.turns[-1]
        print(
            f"{question.id}: {len(record.turns)} turns, "
            f"cov {record.turns[0].cov:.3f} -> {last.cov:.3f} "
            f"(oracle {last.oracle_cov:.3f}), end={record.end_reason}"
        )

    markdown, _ = render_tables(load_rows([Path(args.out)]))
    print()
    print(markdown)


if __name__ == "__main__":
    main()
