#!/usr/bin/env python3
"""Sweep the number of content-feedback targets k and measure how coverage,
incorporation, and break rate respond, using the synthetic agent with scripted
judges. Emits one CSV row per (k, turn).

With a fixed per-target incorporation probability the synthetic agent gains
coverage faster at larger k while its break dynamics stay unchanged, which is
the baseline to compare real agents against.
"""

import argparse
import csv
import sys

from revbench.agents import AgentAdapter
from revbench.evidence import Fetcher, ReaderConfig
from revbench.judging import JudgeClient, JudgeConfig
from revbench.session import SessionContext, SessionProtocol, run_session
from revbench.synthetic import (
    SyntheticBehavior,
    SyntheticJudgeBackend,
    stub_reader_transport,
    synthetic_dataset,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k", type=int, nargs="+", default=[1, 2, 3, 4])
    parser.add_argument("--seeds", type=int, default=50)
    parser.add_argument("--turns", type=int, default=4)
    parser.add_argument("--criteria", type=int, default=8)
    parser.add_argument("--p-inc", type=float, default=0.85)
    parser.add_argument("--p-break", type=float, default=0.25)
    parser.add_argument("--out", default="-", help="CSV path, or - for stdout")
    args = parser.parse_args()

    dataset = synthetic_dataset("k-sweep", {"q1": [1.0] * args.criteria})
    question = dataset.get("q1")
    adapter = AgentAdapter(kind="synthetic", locator="")
    behavior = SyntheticBehavior(
        p_inc=args.p_inc, p_break=args.p_break, cite_rate=0.7, init_full=0.25, init_partial=0.25
    )

    rows = []
    for k in args.k:
        protocol = SessionProtocol(feedback_kind="content", k=k, max_turns=args.turns)
        per_turn: dict[int, dict[str, list[float]]] = {}
        for seed in range(args.seeds):
            context = SessionContext(
                judges=JudgeClient(SyntheticJudgeBackend(), JudgeConfig()),
                fetcher=Fetcher(ReaderConfig(transport=stub_reader_transport)),
                behavior=behavior,
            )
            record = run_session(question, adapter, protocol, context, master_seed=seed)
            for turn in record.turns:
                bucket = per_turn.setdefault(turn.turn, {"cov": [], "inc": [], "brk": []})
                bucket["cov"].append(turn.cov)
                if turn.inc is not None:
                    bucket["inc"].append(turn.inc)
                if turn.brk is not None:
                    bucket["brk"].append(turn.brk)
        for turn, bucket in sorted(per_turn.items()):
            rows.append(
                {
                    "k": k,
                    "turn": turn,
                    "mean_cov": sum(bucket["cov"]) / len(bucket["cov"]),
                    "mean_inc": sum(bucket["inc"]) / len(bucket["inc"]) if bucket["inc"] else "",
                    "mean_brk": sum(bucket["brk"]) / len(bucket["brk"]) if bucket["brk"] else "",
                    "n_sessions": len(bucket["cov"]),
                }
            )

    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.DictWriter(out, fieldnames=["k", "turn", "mean_cov", "mean_inc", "mean_brk", "n_sessions"])
    writer.writeheader()
    writer.writerows(rows)
    if out is not sys.stdout:
        out.close()
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
