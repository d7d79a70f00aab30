"""Command-line interface.

    syndial generate   --input notes.csv --output traces.jsonl --backend mock --mock-script script.json
    syndial evaluate   --corpus notes.csv --traces traces.jsonl --report report.csv
    syndial robustness --input notes.csv --runs 3 --out robustness.csv ...
    syndial sweep      --input notes.csv --alphas 0,0.1,0.4,0.5,0.7,1 --out sweep.csv ...
    syndial report     --traces traces.jsonl --kind iterations --out iterations.csv

Exit codes: 0 success, 1 usage error, 2 backend failure, 3 data validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .corpus import ColumnMap, Corpus, load_corpus, save_dialogues
from .errors import AuthFailure, BackendError, DataValidationError
from .harness import (
    alpha_sweep,
    cost_report,
    evaluate_corpus,
    format_table,
    iteration_report,
    ledger_from_traces,
    robustness,
    write_cost_csv,
    write_eval_csv,
    write_iteration_csv,
    write_robustness_csv,
    write_sweep_csv,
)
from .llm import DEFAULT_API_KEY_ENV, DEFAULT_MODEL, Backend, CallLedger, MockBackend, OpenAIBackend
from .metrics import Scorer
from .pipeline import DEFAULT_MAX_ITERATIONS, DEFAULT_THRESHOLD, DEFAULT_TOKEN_GATE, PipelineConfig, dump_traces, load_traces, run_corpus
from .prompts import DEFAULT_SUMMARY_TOKENS, PromptSet

log = logging.getLogger("syndial")

EXIT_OK, EXIT_USAGE, EXIT_BACKEND, EXIT_DATA = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or YAML file whose keys mirror the long flags; flags win")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _corpus_args(p: argparse.ArgumentParser, flag: str) -> None:
    p.add_argument(flag, dest="input", required=False, help="note corpus (CSV or JSONL)")
    p.add_argument("--format", choices=["csv", "jsonl"], help="default: from the file extension")
    p.add_argument("--id-col", default="ID")
    p.add_argument("--note-col", default="section_text")
    p.add_argument("--dialogue-col", default="dialogue")
    p.add_argument("--patient-col")
    p.add_argument("--visit-col")


def _backend_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=["openai", "mock"], default="openai")
    p.add_argument("--base-url", default="https://api.openai.com")
    p.add_argument("--model", default=DEFAULT_MODEL)
    p.add_argument("--api-key-env", default=DEFAULT_API_KEY_ENV)
    p.add_argument("--mock-script", help="JSON array of {note_id, purpose, iteration?, target?, text}")
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--concurrency", type=int, default=8, help="max in-flight backend requests")
    p.add_argument("--templates", help="directory overriding the bundled prompt templates")
    p.add_argument("--parallelism", type=int, default=1, help="notes processed concurrently")


def _loop_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, help="similarity weight; default 0.1 with references, else 0")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERATIONS)
    p.add_argument("--token-gate", type=int, default=DEFAULT_TOKEN_GATE)
    p.add_argument("--summary-tokens", type=int, default=DEFAULT_SUMMARY_TOKENS)
    p.add_argument("--history", action="store_true", help="feed each visit the previous visit's dialogue")
    p.add_argument("--keep-labels", action="store_true", help="score dialogue text with speaker labels")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="syndial", description="Synthetic patient-physician dialogues from clinical notes.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="run the feedback loop over a corpus")
    _common(g)
    _corpus_args(g, "--input")
    _loop_args(g)
    _backend_args(g)
    g.add_argument("--output", help="traces JSONL")
    g.add_argument("--dialogues", help="selected dialogues JSONL")
    g.add_argument("--ledger", help="write the backend call ledger as JSONL")

    e = sub.add_parser("evaluate", help="intrinsic metrics for generated traces")
    _common(e)
    _corpus_args(e, "--corpus")
    _backend_args(e)
    e.add_argument("--traces")
    e.add_argument("--metrics", default="sim,extr,div,fact")
    e.add_argument("--report", help="CSV report path (a PNG figure is written alongside)")
    e.add_argument("--json", help="also write the full report as JSON")
    e.add_argument("--keep-labels", action="store_true")
    e.add_argument("--pool-roles", action="store_true", help="Self-BLEU over all utterances instead of per role")
    e.add_argument("--reference-rows", action="store_true", help="append published baseline rows")
    e.add_argument("--no-figures", action="store_true")

    r = sub.add_parser("robustness", help="repeat the pipeline and report mean and sample std")
    _common(r)
    _corpus_args(r, "--input")
    _loop_args(r)
    _backend_args(r)
    r.add_argument("--runs", type=int, default=3)
    r.add_argument("--out", help="CSV path")
    r.add_argument("--no-figures", action="store_true")

    s = sub.add_parser("sweep", help="one pipeline run per alpha")
    _common(s)
    _corpus_args(s, "--input")
    _loop_args(s)
    _backend_args(s)
    s.add_argument("--alphas", type=_floats, default=[0.0, 0.1, 0.4, 0.5, 0.7, 1.0])
    s.add_argument("--out", help="CSV path")
    s.add_argument("--no-figures", action="store_true")

    rp = sub.add_parser("report", help="per-iteration or cost report from saved traces")
    _common(rp)
    rp.add_argument("--traces")
    rp.add_argument("--kind", choices=["iterations", "cost"], default="iterations")
    rp.add_argument("--ledger", help="call ledger JSONL; default: rebuild calls from the traces")
    rp.add_argument("--out", help="CSV path")
    rp.add_argument("--no-figures", action="store_true")
    return parser


def _load_config(argv: list[str]) -> dict:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    text = Path(known.config).read_text(encoding="utf-8")
    data = json.loads(text) if known.config.endswith(".json") else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise UsageError(f"config {known.config} must hold a mapping")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _require(args, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise UsageError(f"--{name.replace('_', '-')} is required (flag or config)")


def _corpus(args) -> Corpus:
    cm = ColumnMap(args.id_col, args.note_col, args.dialogue_col, args.patient_col, args.visit_col)
    return load_corpus(args.input, args.format, cm)


def _backend(args) -> Backend:
    prompts = PromptSet.load(args.templates) if args.templates else None
    if args.backend == "mock":
        if not args.mock_script:
            raise UsageError("--mock-script is required with --backend mock")
        return MockBackend.from_file(args.mock_script, model=args.model, max_concurrency=args.concurrency, prompts=prompts)
    return OpenAIBackend(
        base_url=args.base_url,
        model=args.model,
        api_key_env=args.api_key_env,
        max_retries=args.max_retries,
        max_concurrency=args.concurrency,
        prompts=prompts,
    )


def _pipeline_config(args, corpus: Corpus) -> PipelineConfig:
    try:
        return PipelineConfig.for_corpus(
            corpus,
            alpha=args.alpha,
            threshold=args.threshold,
            max_iterations=args.max_iters,
            token_gate=args.token_gate,
            summary_target_tokens=args.summary_tokens,
            history_mode=args.history,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_failures(traces) -> int:
    failed = [t for t in traces if t.failed]
    if not failed:
        return EXIT_OK
    for t in failed:
        print(f"warning: note {t.note_id} failed: {t.error}", file=sys.stderr)
    if any((t.error or "").startswith(AuthFailure.__name__) for t in failed):
        return EXIT_BACKEND
    if len(failed) == len(traces):
        return EXIT_BACKEND
    return EXIT_OK


def cmd_generate(args) -> int:
    _require(args, "input", "output")
    corpus = _corpus(args)
    cfg = _pipeline_config(args, corpus)
    backend = _backend(args)
    traces = run_corpus(corpus.notes, cfg, backend, Scorer(strip_labels=not args.keep_labels), args.parallelism)
    dump_traces(traces, args.output)
    if args.dialogues:
        save_dialogues(traces, args.dialogues)
    if args.ledger:
        backend.ledger.write_jsonl(args.ledger)
    ok = sum(not t.failed for t in traces)
    print(f"{ok}/{len(traces)} notes generated (alpha={cfg.alpha}, threshold={cfg.threshold}) -> {args.output}")
    return _check_failures(traces)


def cmd_evaluate(args) -> int:
    _require(args, "input", "traces")
    metrics = {m.strip() for m in args.metrics.split(",") if m.strip()}
    corpus = _corpus(args)
    traces = load_traces(args.traces)
    backend = _backend(args) if "fact" in metrics else None
    try:
        report = evaluate_corpus(
            corpus,
            traces,
            backend,
            metrics,
            strip_labels=not args.keep_labels,
            diversity_by_role=not args.pool_roles,
            parallelism=args.parallelism,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    c = report.corpus_row()
    print(format_table(["metric", "value"], [[k, v] for k, v in c.items()]))
    print(f"factuality skipped: {report.skipped_factuality}")
    if args.report:
        write_eval_csv(report, args.report, reference_rows=args.reference_rows)
        if not args.no_figures:
            from .plots import figure_path, plot_metrics

            plot_metrics(report, figure_path(args.report))
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_robustness(args) -> int:
    _require(args, "input")
    corpus = _corpus(args)
    cfg = _pipeline_config(args, corpus)
    backend = _backend(args)
    stats = robustness(corpus, cfg, args.runs, backend, args.parallelism, Scorer(strip_labels=not args.keep_labels))
    rows = [[f"run_{i}", r.get("similarity"), r.get("extractiveness")] for i, r in enumerate(stats.per_run, 1)]
    rows += [["avg", stats.mean.get("similarity"), stats.mean.get("extractiveness")]]
    rows += [["std", stats.sample_std.get("similarity"), stats.sample_std.get("extractiveness")]]
    print(format_table(["", "similarity", "extractiveness"], rows))
    if args.out:
        write_robustness_csv(stats, args.out)
        if not args.no_figures:
            from .plots import figure_path, plot_robustness

            plot_robustness(stats, figure_path(args.out))
    return EXIT_BACKEND if stats.failed_runs == args.runs else EXIT_OK


def cmd_sweep(args) -> int:
    _require(args, "input")
    corpus = _corpus(args)
    cfg = _pipeline_config(args, corpus)
    backend = _backend(args)
    rows = alpha_sweep(corpus, cfg, args.alphas, backend, args.parallelism, Scorer(strip_labels=not args.keep_labels))
    print(format_table(["alpha", "similarity", "extractiveness"], [[r["alpha"], r["similarity_mean"], r["extractiveness_mean"]] for r in rows]))
    if args.out:
        write_sweep_csv(rows, args.out)
        if not args.no_figures and rows:
            from .plots import figure_path, plot_sweep

            plot_sweep(rows, figure_path(args.out))
    return EXIT_OK


def cmd_report(args) -> int:
    _require(args, "traces")
    traces = load_traces(args.traces)
    if args.kind == "iterations":
        if not traces:
            raise DataValidationError("no traces to report on")
        rep = iteration_report(traces)
        print(rep.summary)
        if args.out:
            write_iteration_csv(rep, args.out)
            if not args.no_figures:
                from .plots import figure_path, plot_iterations

                plot_iterations(rep, figure_path(args.out))
        return EXIT_OK

    entries = CallLedger.read_jsonl(args.ledger).entries if args.ledger else ledger_from_traces(traces)
    cost = cost_report(entries)
    print(
        format_table(
            ["", "avg", "max", "min"],
            [["generate calls per note", cost["generate_calls_avg"], cost["generate_calls_max"], cost["generate_calls_min"]]],
        )
    )
    print("totals: " + ", ".join(f"{k}={v}" for k, v in cost["totals"].items()))
    if args.out:
        write_cost_csv(cost, args.out)
        if not args.no_figures:
            from .plots import figure_path, plot_cost

            plot_cost(cost, figure_path(args.out))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "robustness": cmd_robustness,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        config = _load_config(argv)
    except (OSError, ValueError, yaml.YAMLError, UsageError) as exc:
        print(f"syndial: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if config:
        for sp in parser._subparsers._group_actions[0].choices.values():
            sp.set_defaults(**config)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"syndial {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"syndial {args.command}: backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (DataValidationError, FileNotFoundError) as exc:
        print(f"syndial {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
