"""Command line front end tying corpus, metrics, generation, and serving together.

Every command is deterministic given its inputs, the seed, and any transcript
file, and each artifact embeds the configuration that produced it. Exit codes:
0 success, 1 usage, 2 data or config error, 3 upstream completion backend
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as cp
from . import distcheck as dc
from . import selection as sel
from . import synthgen as sg
from . import textmetrics as tm

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_UPSTREAM = 3

_REGISTRY = {d.name: d for d in tm.default_metrics()}
# needs an embedding backend, so it is opt-in on the command line
_DEFAULT_METRICS = tuple(n for n in tm.METRIC_NAMES if n != "embedding-score")


def _json_blob(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _metric(name: str) -> tm.MetricDescriptor:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown metric {name!r}; choose from {', '.join(tm.METRIC_NAMES)}"
        ) from None


def cmd_summarize(args) -> int:
    corpus = cp.load_corpus(args.corpus)
    rows = cp.dataset_summary(corpus, policy=args.pairing)
    config = {
        "command": "summarize",
        "corpus": str(args.corpus),
        "pairing": args.pairing,
        "seed": args.seed,
    }
    header = (
        f"{'source':<34} {'commits':>7} {'related':>8} {'rel/commit':>10}"
        f" {'independent':>11} {'ind/commit':>10}"
    )
    lines = [header]
    for row in rows:
        lines.append(
            f"{row['source']:<34} {row['commits']:>7} {row['related']:>8}"
            f" {row['related_avg']:>10.2f} {row['independent']:>11}"
            f" {row['independent_avg']:>10.2f}"
        )
    table = "\n".join(lines)
    print(table)
    if args.out:
        out = Path(args.out)
        _write(out / "summary.json", _json_blob({"config": config, "rows": rows}))
        _write(out / "summary.txt", f"# {json.dumps(config, sort_keys=True)}\n{table}\n")
    return EXIT_OK


def cmd_select(args) -> int:
    corpus = cp.load_corpus(args.corpus)
    names = (
        [n.strip() for n in args.metrics.split(",") if n.strip()]
        if args.metrics
        else list(_DEFAULT_METRICS)
    )
    provider = None
    if args.embedding_url:
        provider = tm.HttpEmbeddingProvider(args.embedding_url)
    elif "embedding-score" in names:
        raise ValueError("embedding-score requires --embedding-url")
    online = _metric(args.online_metric)

    results = {}
    for name in names:
        results[name] = sel.q_metric(
            corpus,
            _metric(name),
            online,
            policy=args.pairing,
            provider=provider,
        )
    report = sel.selection_report(results, online_metric=online.name)

    config = {
        "command": "select",
        "corpus": str(args.corpus),
        "pairing": args.pairing,
        "metrics": names,
        "online_metric": online.name,
        "seed": args.seed,
    }
    text = report.to_text()
    print(text)
    if args.out:
        out = Path(args.out)
        payload = {"config": config, **report.to_json_dict()}
        _write(out / "report.json", _json_blob(payload))
        _write(out / "report.txt", f"# {json.dumps(config, sort_keys=True)}\n{text}\n")
    return EXIT_OK


def cmd_extend(args) -> int:
    if args.attempts < 1:
        print("error: --attempts must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if not args.transcript and not args.llm_url:
        print("error: extend needs --transcript or --llm-url", file=sys.stderr)
        return EXIT_USAGE
    corpus = cp.load_corpus(args.corpus)

    if args.llm_url:
        client = sg.HttpLlmClient(args.llm_url)
        if args.transcript:
            client = sg.TranscriptRecorder(client, args.transcript)
    else:
        client = sg.TranscriptReplayClient(args.transcript)

    threshold = args.tb if args.direction == sg.DIRECTION_BACKWARD else args.tf
    extended, outcomes = sg.extend_corpus(
        corpus,
        client,
        args.direction,
        threshold=threshold,
        attempts=args.attempts,
        icl_count=args.icl,
        jobs_per_node=args.jobs_per_node,
        seed=args.seed,
        parallelism=args.parallelism,
    )

    config = {
        "command": "extend",
        "corpus": str(args.corpus),
        "direction": args.direction,
        "threshold": threshold,
        "attempts": args.attempts,
        "icl": args.icl,
        "jobs_per_node": args.jobs_per_node,
        "seed": args.seed,
        "transcript": str(args.transcript) if args.transcript else None,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cp.save_corpus(extended, out / "extended_corpus.jsonl")
    provenance_lines = [json.dumps({"config": config}, sort_keys=True)]
    provenance_lines += [
        json.dumps(o.to_json_dict(), sort_keys=True, ensure_ascii=False)
        for o in outcomes
    ]
    _write(out / "provenance.jsonl", "\n".join(provenance_lines) + "\n")

    accepted = sum(1 for o in outcomes if o.accepted)
    print(f"{args.direction}: accepted {accepted} of {len(outcomes)} jobs")
    for o in outcomes:
        if not o.accepted:
            print(
                f"  exhausted {o.commit_id}/{o.job.input_node} job {o.job_index}"
                f" after {o.attempts_used} attempts"
            )
    return EXIT_OK


def cmd_validate(args) -> int:
    corpus = cp.load_corpus(args.corpus)
    log = dc.load_telemetry(args.telemetry)
    filtered, zero_report = dc.filter_zero(log)
    factor = dc.scale_factor(corpus, filtered)
    scaled = dc.scaled_values(filtered, factor)
    corpus_values = dc.corpus_ed_values(corpus, policy=args.pairing)
    report = dc.compare(corpus_values, scaled, bucket_width=args.bucket_width)

    config = {
        "command": "validate",
        "corpus": str(args.corpus),
        "telemetry": str(args.telemetry),
        "pairing": args.pairing,
        "bucket_width": args.bucket_width,
        "seed": args.seed,
    }
    payload = {
        "config": config,
        "telemetry_records": len(log),
        "removed_fraction": zero_report["removed_fraction"],
        "scale_factor": factor,
        "ks": report["ks"],
        "peaks": report["peaks"],
    }
    print(_json_blob(payload), end="")
    if args.out:
        out = Path(args.out)
        _write(
            out / "distribution.json",
            _json_blob({**payload, "histogram": report["histogram"]}),
        )
        _write(out / "histogram.csv", dc.histogram_csv(report))
    return EXIT_OK


def _parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not host:
        raise ValueError(f"--bind must look like host:port, got {bind!r}")
    return host, int(port)


def cmd_serve(args) -> int:
    from .annotsvc import AnnotationService, build_app

    try:
        host, port = _parse_bind(args.bind)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    corpus = cp.load_corpus(args.corpus)
    service = AnnotationService(corpus, args.data_dir, seed=args.seed)
    app = build_app(service)

    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmgeval",
        description="Choose offline commit-message metrics that track editing effort.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None):
        p.add_argument("--corpus", required=True, help="corpus JSONL path")
        p.add_argument(
            "--pairing",
            choices=("direct", "closure"),
            default=cp.DEFAULT_POLICY,
            help="how related pairs are derived",
        )
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=out_default, help="artifact directory")

    p = sub.add_parser("summarize", help="per-source pair counts")
    common(p)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("select", help="rank offline metrics against the online signal")
    common(p)
    p.add_argument("--metrics", help="comma-separated metric names (default: all built-in)")
    p.add_argument("--online-metric", default="edit-distance")
    p.add_argument("--embedding-url", help="vector backend for embedding-score")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("extend", help="grow the corpus with synthetic messages")
    p.add_argument("direction", choices=(sg.DIRECTION_BACKWARD, sg.DIRECTION_FORWARD))
    common(p, out_default="out")
    p.add_argument("--tb", type=float, default=sg.DEFAULT_BACKWARD_THRESHOLD,
                   help="max fraction of content added (backward)")
    p.add_argument("--tf", type=float, default=sg.DEFAULT_FORWARD_THRESHOLD,
                   help="max fraction of content removed (forward)")
    p.add_argument("--attempts", type=int, default=sg.DEFAULT_ATTEMPTS)
    p.add_argument("--icl", type=int, default=sg.DEFAULT_ICL_COUNT)
    p.add_argument("--jobs-per-node", type=int, default=1)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--transcript", help="record to (with --llm-url) or replay from")
    p.add_argument("--llm-url", help="live chat-completion endpoint")
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("validate", help="compare corpus edit distances to telemetry")
    common(p)
    p.add_argument("--telemetry", required=True, help="CSV or JSONL telemetry file")
    p.add_argument("--bucket-width", type=float, default=dc.DEFAULT_BUCKET_WIDTH)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bind", default="127.0.0.1:8040")
    p.add_argument("--data-dir", default="annot-data")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return args.func(args)
    except sg.LlmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UPSTREAM
    except (cp.CorpusError, tm.MetricUnavailable, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
