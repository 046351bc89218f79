"""Command-line entry points: run, evaluate, core-set, tables, replay."""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
from pathlib import Path

from .agents import SYNTHETIC, parse_agent_spec
from .backends import HttpBackend
from .dataset import build_core_set, load_dataset, save_dataset
from .errors import RevbenchError
from .evidence import Fetcher, ReaderConfig
from .fixes import ReviserLimits, SearchConfig
from .judging import JudgeClient, JudgeConfig
from .model import Question, ScoreVector
from .templates import FormatSeed
from .runlog import RunWriter, load_run, replay_rows
from .session import SessionContext, SessionProtocol, evaluate_report, run_session
from .synthetic import SyntheticBehavior, load_scripted_backend, stub_reader_transport
from .tables import load_rows, render_tables


def _build_judges(args) -> JudgeClient:
    config = JudgeConfig.from_file(args.judge_config) if args.judge_config else JudgeConfig()
    if getattr(args, "scripted_judges", None):
        backend = load_scripted_backend(args.scripted_judges)
    else:
        backend = HttpBackend(config.endpoint, config.auth_env)
    return JudgeClient(backend, config)


def _build_fetcher(args, scripted: bool) -> Fetcher:
    reader = ReaderConfig(refetch=bool(getattr(args, "refetch", False)))
    if scripted:
        reader.transport = stub_reader_transport
    if getattr(args, "page_cache", None):
        reader.cache_dir = args.page_cache
    return Fetcher(reader)


def _load_seed_bank(path: str | None):
    if not path:
        return None
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return tuple(FormatSeed(r["id"], r["text"]) for r in raw)


def _questions(paths: list[str]) -> list[Question]:
    questions: list[Question] = []
    for p in paths:
        questions.extend(load_dataset(p).questions)
    return questions


def cmd_run(args) -> int:
    scripted = bool(args.scripted_judges)
    judges = _build_judges(args)
    fetcher = _build_fetcher(args, scripted)

    adapter = parse_agent_spec(args.agent, timeout_s=args.agent_timeout, agent_id=args.agent_id)
    behavior = None
    if adapter.kind == SYNTHETIC and adapter.locator:
        if adapter.locator.lstrip().startswith("{"):
            behavior = SyntheticBehavior(**json.loads(adapter.locator))
        else:
            behavior = SyntheticBehavior.from_file(adapter.locator)

    search = None
    if args.search_fixture:
        search = SearchConfig.from_fixture_file(args.search_fixture)

    context = SessionContext(
        judges=judges,
        fetcher=fetcher,
        search=search,
        seed_bank=_load_seed_bank(args.format_seeds),
        behavior=behavior,
        reviser_limits=ReviserLimits(),
    )
    protocol = SessionProtocol(
        feedback_kind=args.feedback, k=args.k, max_turns=args.turns, fix=args.fix
    )
    questions = _questions(args.dataset)

    writer = RunWriter(Path(args.out))
    writer.write_manifest(
        config={
            "agent": adapter.agent_id,
            "protocol": {
                "feedback_kind": protocol.feedback_kind,
                "k": protocol.k,
                "max_turns": protocol.max_turns,
                "fix": protocol.fix,
            },
            "judge_model": judges.config.model,
            "scripted_judges": scripted,
            "datasets": list(args.dataset),
        },
        seeds={"master": args.seed},
    )

    def one(question: Question):
        record = run_session(question, adapter, protocol, context, master_seed=args.seed)
        weights = {c.id: c.weight for c in question.checklist}
        return record, weights

    if args.parallel_sessions > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.parallel_sessions) as pool:
            futures = [pool.submit(one, q) for q in questions]
            for future in futures:  # submission order keeps the log deterministic
                record, weights = future.result()
                writer.write_session(record, weights)
    else:
        for q in questions:
            record, weights = one(q)
            writer.write_session(record, weights)

    print(f"wrote {args.out}/run.jsonl ({len(questions)} sessions)")
    return 0


def cmd_evaluate(args) -> int:
    scripted = bool(args.scripted_judges)
    judges = _build_judges(args)
    fetcher = _build_fetcher(args, scripted)
    dataset = load_dataset(args.dataset)
    question = dataset.get(args.question_id)
    report = Path(args.report).read_text(encoding="utf-8")
    evaluation = evaluate_report(question, report, judges, fetcher)

    from .metrics import coverage_score, factuality_scores, presentation_score

    cov = float(coverage_score(question.checklist, evaluation.scores))
    fa, gr = factuality_scores(evaluation.counts)
    pre = float(presentation_score(evaluation.presentation))
    result = {
        "question_id": question.id,
        "cov": round(cov, 4),
        "fa": round(float(fa), 4),
        "gr": round(float(gr), 4),
        "pre": round(pre, 4),
        "counts": {
            "n_claims": evaluation.counts.n_claims,
            "n_cited": evaluation.counts.n_cited,
            "n_supported": evaluation.counts.n_supported,
            "n_citations": evaluation.counts.n_citations,
        },
        "flags": evaluation.counts.flags,
        "scores": evaluation.scores.to_jsonable(),
        "presentation": evaluation.presentation,
        "errors": evaluation.errors,
    }
    text = json.dumps(result, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_core_set(args) -> int:
    datasets = [load_dataset(p) for p in args.dataset]
    raw = json.loads(Path(args.evals).read_text(encoding="utf-8"))
    evals = {
        agent: {qid: ScoreVector.from_jsonable(vec) for qid, vec in per_question.items()}
        for agent, per_question in raw.items()
    }
    core = build_core_set(datasets, evals, args.per_dataset_n, args.min_failed, args.seed)
    save_dataset(core, args.out)
    print(f"wrote {args.out} ({len(core)} questions)")
    return 0


def cmd_tables(args) -> int:
    rows = load_rows(args.runs)
    markdown, csv_text = render_tables(rows)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "tables.md").write_text(markdown, encoding="utf-8")
        (out / "tables.csv").write_text(csv_text, encoding="utf-8")
        print(f"wrote {out}/tables.md and {out}/tables.csv")
    else:
        print(markdown)
    return 0


def cmd_replay(args) -> int:
    manifest, rows, warnings = load_run(args.run)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    mismatches = replay_rows(rows)
    if mismatches:
        for m in mismatches:
            print(f"mismatch: {m}", file=sys.stderr)
        print(f"replay FAILED: {len(mismatches)} metric mismatches")
        return 1
    print(f"replay OK: {len(rows)} rows, all metrics reproduce")
    if args.tables:
        markdown, _ = render_tables(rows)
        print(markdown)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revbench")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run multi-turn revision sessions")
    run.add_argument("--dataset", action="append", required=True, help="dataset JSON (repeatable)")
    run.add_argument("--agent", required=True, help="kind:locator (subprocess|http|synthetic)")
    run.add_argument("--agent-id", default="", help="label for the run log")
    run.add_argument("--agent-timeout", type=float, default=600.0)
    run.add_argument("--feedback", choices=["content", "format", "reflect"], default="reflect")
    run.add_argument("--k", type=int, default=1, help="content feedback targets per turn")
    run.add_argument("--turns", type=int, default=2)
    run.add_argument("--fix", choices=["none", "pe", "reviser"], default="none")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--judge-config", default=None)
    run.add_argument("--out", required=True)
    run.add_argument("--scripted-judges", default=None, help='"synthetic" or a config path')
    run.add_argument("--refetch", action="store_true", help="bypass the page cache")
    run.add_argument("--format-seeds", default=None, help="override the format seed bank")
    run.add_argument("--search-fixture", default=None, help="stub search results JSON")
    run.add_argument("--page-cache", default=None, help="on-disk page cache directory")
    run.add_argument("--parallel-sessions", type=int, default=1)
    run.set_defaults(fn=cmd_run)

    ev = sub.add_parser("evaluate", help="score a single report file")
    ev.add_argument("--report", required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--question-id", required=True)
    ev.add_argument("--judge-config", default=None)
    ev.add_argument("--scripted-judges", default=None)
    ev.add_argument("--refetch", action="store_true")
    ev.add_argument("--page-cache", default=None)
    ev.add_argument("--out", default=None)
    ev.set_defaults(fn=cmd_evaluate)

    cs = sub.add_parser("core-set", help="sample a core set of hard questions")
    cs.add_argument("--dataset", action="append", required=True)
    cs.add_argument("--evals", required=True, help="agent -> question -> score vector JSON")
    cs.add_argument("--per-dataset-n", type=int, default=25)
    cs.add_argument("--min-failed", type=int, default=4)
    cs.add_argument("--seed", type=int, default=0)
    cs.add_argument("--out", required=True)
    cs.set_defaults(fn=cmd_core_set)

    tb = sub.add_parser("tables", help="render result tables from run logs")
    tb.add_argument("runs", nargs="+", help="run directories or run.jsonl paths")
    tb.add_argument("--out-dir", default=None)
    tb.set_defaults(fn=cmd_tables)

    rp = sub.add_parser("replay", help="recompute metrics from a stored run")
    rp.add_argument("--run", required=True, help="run directory")
    rp.add_argument("--tables", action="store_true")
    rp.set_defaults(fn=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except RevbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
