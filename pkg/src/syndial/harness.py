"""Experiment driver: corpus evaluation, robustness runs, alpha sweeps and reports."""

from __future__ import annotations

import csv
import logging
import statistics
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import Corpus
from .errors import BackendError, DataValidationError, EmptyConceptList
from .llm import Backend, CallLedgerEntry
from .metrics import build_concept_set, concept_recall, diversity, extractiveness, similarity
from .pipeline import GenerationTrace, PipelineConfig, run_corpus, with_alpha

log = logging.getLogger(__name__)

ALL_METRICS = frozenset({"sim", "extr", "div", "fact"})

# Published numbers, shown as reference rows next to our own results.
PUBLISHED_BASELINES_MTS = {
    "GPT3.5": {"similarity": 0.48, "extractiveness": 0.46, "diversity": 0.75, "factuality": 0.49},
    "GPT4": {"similarity": 0.53, "extractiveness": 0.50, "diversity": 0.74, "factuality": 0.50},
    "NoteChat": {"similarity": 0.56, "extractiveness": 0.38, "diversity": 0.76, "factuality": 0.34},
    "SynDial": {"similarity": 0.43, "extractiveness": 0.52, "diversity": 0.73, "factuality": 0.53},
}
PUBLISHED_ROBUSTNESS = {
    "similarity": [0.4269, 0.4153, 0.4282],
    "extractiveness": [0.5219, 0.5208, 0.5161],
}
PUBLISHED_ALPHA_SWEEP = [
    (0.0, 0.4153, 0.5208),
    (0.1, 0.4288, 0.502),
    (0.4, 0.4126, 0.4821),
    (0.5, 0.42, 0.4893),
    (0.7, 0.4347, 0.4909),
    (1.0, 0.5055, 0.4831),
]
PUBLISHED_NOTECHAT_CALLS = {"avg": 63.9, "max": 133, "min": 23}


def _mean(values: Iterable[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


# --- evaluation --------------------------------------------------------------


@dataclass
class NoteScores:
    note_id: str
    extractiveness: float | None = None
    similarity: float | None = None
    factuality: float | None = None


@dataclass
class CostSummary:
    generate_calls_total: int = 0
    summarize_calls_total: int = 0
    extract_calls_total: int = 0
    generate_calls_per_note_mean: float | None = None
    generate_calls_per_note_max: int | None = None
    generate_calls_per_note_min: int | None = None


@dataclass
class EvalReport:
    per_note: list[NoteScores]
    similarity_mean: float | None
    extractiveness_mean: float | None
    diversity: float | None
    factuality_mean: float | None
    skipped_factuality: int
    cost: CostSummary = field(default_factory=CostSummary)

    def corpus_row(self) -> dict:
        return {
            "similarity": self.similarity_mean,
            "extractiveness": self.extractiveness_mean,
            "diversity": self.diversity,
            "factuality": self.factuality_mean,
        }

    def to_dict(self) -> dict:
        return asdict(self)


def _factuality(note_text: str, dialogue_text: str, note_id: str, backend: Backend) -> float | None:
    try:
        note_concepts = build_concept_set(backend.extract_concepts(note_text, note_id, target="note"))
        dialogue_concepts = build_concept_set(backend.extract_concepts(dialogue_text, note_id, target="dialogue"))
        return concept_recall(note_concepts, dialogue_concepts)
    except (BackendError, EmptyConceptList) as exc:
        log.warning("factuality skipped for %s: %s", note_id, exc)
        return None


def evaluate_corpus(
    corpus: Corpus,
    traces: Sequence[GenerationTrace],
    backend: Backend | None = None,
    metrics: Iterable[str] = ALL_METRICS,
    *,
    strip_labels: bool = True,
    diversity_by_role: bool = True,
    parallelism: int = 1,
) -> EvalReport:
    """Score the selected dialogue of every trace.

    Similarity is reported only when the corpus has reference dialogues.
    Factuality needs ``backend`` for concept extraction; notes whose
    extraction fails, or whose note yields no concepts, count as skipped.
    """
    metrics = set(metrics)
    unknown = metrics - ALL_METRICS
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    if "fact" in metrics and backend is None:
        raise ValueError("factuality needs a backend for concept extraction")
    notes = corpus.by_id()
    missing = [n.id for n in corpus if n.id not in {t.note_id for t in traces}]
    if missing:
        raise DataValidationError(f"no trace for notes: {missing[:5]}")
    refs = corpus.has_references and not corpus.is_empty

    ordered = [t for t in traces if t.note_id in notes]
    per_note = [NoteScores(t.note_id) for t in ordered]
    dialogues = []
    for row, t in zip(per_note, ordered):
        best = t.selected_attempt
        if best is None:
            continue
        dialogues.append(best.dialogue)
        note = notes[t.note_id]
        if "extr" in metrics:
            row.extractiveness = extractiveness(note.text, best.dialogue, strip_labels=strip_labels).f1
        if "sim" in metrics and refs:
            row.similarity = similarity(best.dialogue, note.reference_dialogue, strip_labels=strip_labels).f1

    extract_before = backend.ledger.count("extract_concepts") if backend is not None else 0
    if "fact" in metrics:
        jobs = [(row, notes[t.note_id], t.selected_attempt) for row, t in zip(per_note, ordered)]

        def fact_job(job):
            row, note, best = job
            if best is None:
                return None
            return _factuality(note.text, best.dialogue.raw_text, note.id, backend)

        with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
            for (row, _, _), value in zip(jobs, pool.map(fact_job, jobs)):
                row.factuality = value

    div = None
    if "div" in metrics:
        div = diversity(dialogues, by_role=diversity_by_role)

    gen_calls = [t.generate_calls for t in ordered]
    cost = CostSummary(
        generate_calls_total=sum(gen_calls),
        summarize_calls_total=sum(t.summarize_calls for t in ordered),
        extract_calls_total=(backend.ledger.count("extract_concepts") - extract_before) if backend else 0,
        generate_calls_per_note_mean=_mean(gen_calls),
        generate_calls_per_note_max=max(gen_calls, default=None),
        generate_calls_per_note_min=min(gen_calls, default=None),
    )
    fact_scored = sum(1 for r in per_note if r.factuality is not None)
    return EvalReport(
        per_note=per_note,
        similarity_mean=_mean(r.similarity for r in per_note) if "sim" in metrics and refs else None,
        extractiveness_mean=_mean(r.extractiveness for r in per_note) if "extr" in metrics else None,
        diversity=div,
        factuality_mean=_mean(r.factuality for r in per_note) if "fact" in metrics else None,
        skipped_factuality=(len(per_note) - fact_scored) if "fact" in metrics else 0,
        cost=cost,
    )


# --- multi-run statistics ----------------------------------------------------


@dataclass
class RunStats:
    per_run: list[dict]
    mean: dict
    sample_std: dict
    failed_runs: int = 0


def run_stats(per_run: Sequence[dict], failed_runs: int = 0) -> RunStats:
    """Across-run mean and sample (n-1) standard deviation of each metric.

    A metric's std is None with fewer than two runs.

    >>> s = run_stats([{"similarity": v} for v in (0.4269, 0.4153, 0.4282)])
    >>> round(s.mean["similarity"], 4), round(s.sample_std["similarity"], 4)
    (0.4235, 0.0071)
    """
    keys = []
    for r in per_run:
        keys.extend(k for k in r if k not in keys)
    mean, std = {}, {}
    for k in keys:
        vals = [r[k] for r in per_run if r.get(k) is not None]
        mean[k] = statistics.fmean(vals) if vals else None
        std[k] = statistics.stdev(vals) if len(vals) >= 2 else None
    return RunStats(list(per_run), mean, std, failed_runs)


def corpus_means(traces: Sequence[GenerationTrace]) -> dict:
    """Means of the selected attempts' similarity and extractiveness."""
    best = [t.selected_attempt for t in traces if t.selected_attempt is not None]
    return {
        "similarity": _mean(a.scores.similarity for a in best),
        "extractiveness": _mean(a.scores.extractiveness for a in best),
    }


def robustness(
    corpus: Corpus,
    cfg: PipelineConfig,
    runs: int,
    backend: Backend,
    parallelism: int = 1,
    scorer=None,
) -> RunStats:
    if runs < 1:
        raise ValueError("runs must be >= 1")
    per_run, failed = [], 0
    for i in range(runs):
        try:
            traces = run_corpus(corpus.notes, cfg, backend, scorer, parallelism)
        except Exception:
            log.exception("robustness run %d failed", i + 1)
            failed += 1
            continue
        per_run.append(corpus_means(traces))
    return run_stats(per_run, failed)


def alpha_sweep(
    corpus: Corpus,
    cfg: PipelineConfig,
    alphas: Sequence[float],
    backend: Backend,
    parallelism: int = 1,
    scorer=None,
) -> list[dict]:
    """One full pipeline run per alpha; rows of {alpha, similarity_mean, extractiveness_mean}."""
    refs = corpus.has_references and not corpus.is_empty
    if any(a > 0 for a in alphas) and not refs:
        raise DataValidationError("alpha > 0 needs reference dialogues for every note")
    rows = []
    for a in alphas:
        traces = run_corpus(corpus.notes, with_alpha(cfg, a), backend, scorer, parallelism)
        m = corpus_means(traces)
        rows.append({"alpha": a, "similarity_mean": m["similarity"], "extractiveness_mean": m["extractiveness"]})
    return rows


# --- trace reports -----------------------------------------------------------


@dataclass
class IterationReport:
    rows: list[dict]
    improved: int
    total: int

    @property
    def summary(self) -> str:
        return f"{self.improved} of {self.total} improved"


def iteration_report(traces: Sequence[GenerationTrace]) -> IterationReport:
    """Per-note extractiveness by iteration.

    A note counts as improved when extractiveness rises between at least one
    pair of consecutive iterations.
    """
    if not traces:
        raise ValueError("iteration_report needs at least one trace")
    rows = []
    for t in traces:
        extr = [a.scores.extractiveness for a in t.attempts]
        improved = any(b > a for a, b in zip(extr, extr[1:]))
        rows.append({"note_id": t.note_id, "extractiveness": extr, "improved": improved})
    return IterationReport(rows, sum(r["improved"] for r in rows), len(rows))


def ledger_from_traces(traces: Sequence[GenerationTrace]) -> list[CallLedgerEntry]:
    """Rebuild generate/summarize ledger entries from saved traces (no token counts)."""
    entries = []
    for t in traces:
        entries.extend(CallLedgerEntry(t.note_id, "summarize", None, 0, 0, 0.0) for _ in range(t.summarize_calls))
        entries.extend(CallLedgerEntry(t.note_id, "generate", i, 0, 0, 0.0) for i in range(1, t.generate_calls + 1))
    return entries


def cost_report(ledger: Iterable[CallLedgerEntry]) -> dict:
    """Per-note generate-call statistics and call totals by purpose.

    Per-note statistics cover notes with at least one generate call.
    """
    entries = list(ledger)
    totals = Counter(e.purpose for e in entries)
    per_note = Counter(e.note_id for e in entries if e.purpose == "generate")
    calls = list(per_note.values())
    return {
        "notes": len(calls),
        "generate_calls_avg": _mean(calls),
        "generate_calls_max": max(calls, default=None),
        "generate_calls_min": min(calls, default=None),
        "totals": {p: totals.get(p, 0) for p in ("generate", "summarize", "extract_concepts")},
    }


# --- CSV output --------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def write_eval_csv(report: EvalReport, path: str | Path, reference_rows: bool = False) -> None:
    header = ["scope", "name", "similarity", "extractiveness", "diversity", "factuality"]
    rows = [["note", r.note_id, r.similarity, r.extractiveness, None, r.factuality] for r in report.per_note]
    c = report.corpus_row()
    rows.append(["corpus", "mean", c["similarity"], c["extractiveness"], c["diversity"], c["factuality"]])
    rows.append(["corpus", "skipped_factuality", None, None, None, report.skipped_factuality])
    cost = report.cost
    for key in (
        "generate_calls_total",
        "summarize_calls_total",
        "extract_calls_total",
        "generate_calls_per_note_mean",
        "generate_calls_per_note_max",
        "generate_calls_per_note_min",
    ):
        rows.append(["cost", key, None, None, None, getattr(cost, key)])
    if reference_rows:
        for name, vals in PUBLISHED_BASELINES_MTS.items():
            rows.append(["reference", name, vals["similarity"], vals["extractiveness"], vals["diversity"], vals["factuality"]])
    _write_csv(path, header, rows)


def write_iteration_csv(report: IterationReport, path: str | Path, max_iterations: int | None = None) -> None:
    width = max_iterations or max((len(r["extractiveness"]) for r in report.rows), default=0)
    header = ["note_id"] + [f"extractiveness_{i}" for i in range(1, width + 1)] + ["improved"]
    rows = []
    for r in report.rows:
        extr = list(r["extractiveness"]) + [None] * (width - len(r["extractiveness"]))
        rows.append([r["note_id"], *extr, r["improved"]])
    _write_csv(path, header, rows)


def write_cost_csv(cost: dict, path: str | Path, reference_rows: bool = True) -> None:
    header = ["system", "avg_calls_per_note", "max_calls_per_note", "min_calls_per_note"]
    rows = [["SynDial", cost["generate_calls_avg"], cost["generate_calls_max"], cost["generate_calls_min"]]]
    if reference_rows:
        ref = PUBLISHED_NOTECHAT_CALLS
        rows.append(["NoteChat (published)", ref["avg"], ref["max"], ref["min"]])
    _write_csv(path, header, rows)


def write_robustness_csv(stats: RunStats, path: str | Path) -> None:
    header = ["run", "similarity", "extractiveness"]
    rows = [[f"run_{i}", r.get("similarity"), r.get("extractiveness")] for i, r in enumerate(stats.per_run, start=1)]
    rows.append(["avg", stats.mean.get("similarity"), stats.mean.get("extractiveness")])
    rows.append(["std", stats.sample_std.get("similarity"), stats.sample_std.get("extractiveness")])
    _write_csv(path, header, rows)


def write_sweep_csv(rows: Sequence[dict], path: str | Path) -> None:
    _write_csv(
        path,
        ["alpha", "similarity", "extractiveness"],
        [[r["alpha"], r["similarity_mean"], r["extractiveness_mean"]] for r in rows],
    )


def format_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Fixed-width text table for terminal output."""
    cells = [[str(h) for h in header]] + [[_cell(v) if not isinstance(v, float) else f"{v:.4f}" for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
