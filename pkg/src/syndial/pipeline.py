"""The generate / score / refine loop for turning clinical notes into dialogues.

For each note:

1. if the note is longer than ``token_gate`` (approximate tokens) it is
   summarized once and the summary replaces the note *in the prompt only*;
2. a dialogue is generated, parsed, and scored against the original note
   (extractiveness) and, when available, the reference dialogue (similarity);
3. if the combined score reaches ``threshold`` the loop stops, otherwise the
   note is sent back together with the previous combined score, up to
   ``max_iterations`` attempts in total;
4. the attempt with the highest combined score is selected (earliest on ties).
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import ClinicalNote, Corpus, group_by_patient
from .dialogue import Dialogue, parse_dialogue
from .errors import BackendError, DataValidationError
from .llm import Backend, ChatRequest
from .metrics import ScoreCard, Scorer
from .prompts import DEFAULT_SUMMARY_TOKENS, approx_token_count

log = logging.getLogger(__name__)

DEFAULT_ALPHA_WITH_REFERENCES = 0.1
DEFAULT_THRESHOLD = 0.55
DEFAULT_MAX_ITERATIONS = 3
DEFAULT_TOKEN_GATE = 4000

THRESHOLD_MET = "threshold_met"
ITERATION_CAP = "iteration_cap"


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 0.0
    threshold: float = DEFAULT_THRESHOLD
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    token_gate: int = DEFAULT_TOKEN_GATE
    summary_target_tokens: int = DEFAULT_SUMMARY_TOKENS
    history_mode: bool = False
    temperature: float = 0.7
    max_output_tokens: int = 1024

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.token_gate < 1 or self.summary_target_tokens < 1:
            raise ValueError("token_gate and summary_target_tokens must be positive")

    @classmethod
    def for_corpus(cls, corpus: Corpus, alpha: float | None = None, **kwargs) -> PipelineConfig:
        """Resolve the alpha default (0.1 with references, 0 without) and reject alpha > 0 without references."""
        refs = corpus.has_references and not corpus.is_empty
        if alpha is None:
            alpha = DEFAULT_ALPHA_WITH_REFERENCES if refs else 0.0
        elif alpha > 0 and not refs:
            raise DataValidationError("alpha > 0 needs reference dialogues for every note")
        return cls(alpha=alpha, **kwargs)


@dataclass(frozen=True)
class DialogueAttempt:
    iteration: int
    dialogue: Dialogue
    scores: ScoreCard

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "raw_text": self.dialogue.raw_text,
            "turns": [t.to_dict() for t in self.dialogue.turns],
            "parsed": self.dialogue.labelled,
            "scores": self.scores.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> DialogueAttempt:
        return cls(d["iteration"], parse_dialogue(d["raw_text"]), ScoreCard.from_dict(d["scores"]))


@dataclass
class GenerationTrace:
    note_id: str
    summarized: bool = False
    attempts: list[DialogueAttempt] = field(default_factory=list)
    selected: int | None = None
    termination: str | None = None
    generate_calls: int = 0
    summarize_calls: int = 0
    history_used: bool = False
    summary: str | None = None
    failed: bool = False
    error: str | None = None

    @property
    def selected_attempt(self) -> DialogueAttempt | None:
        return None if self.selected is None else self.attempts[self.selected]

    def to_dict(self) -> dict:
        return {
            "note_id": self.note_id,
            "summarized": self.summarized,
            "attempts": [a.to_dict() for a in self.attempts],
            "selected": self.selected,
            "termination": self.termination,
            "generate_calls": self.generate_calls,
            "summarize_calls": self.summarize_calls,
            "history_used": self.history_used,
            "summary": self.summary,
            "failed": self.failed,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> GenerationTrace:
        return cls(
            note_id=d["note_id"],
            summarized=d["summarized"],
            attempts=[DialogueAttempt.from_dict(a) for a in d["attempts"]],
            selected=d["selected"],
            termination=d["termination"],
            generate_calls=d["generate_calls"],
            summarize_calls=d["summarize_calls"],
            history_used=d.get("history_used", False),
            summary=d.get("summary"),
            failed=d.get("failed", False),
            error=d.get("error"),
        )


def select_best(attempts: Sequence[DialogueAttempt]) -> int:
    # ties go to the earliest attempt
    return max(range(len(attempts)), key=lambda i: (attempts[i].scores.combined, -i))


def run_note(
    note: ClinicalNote,
    cfg: PipelineConfig,
    backend: Backend,
    scorer: Scorer | None = None,
    history: str | None = None,
) -> GenerationTrace:
    """Run the feedback loop for one note.

    A backend error ends the loop and returns the partial trace with
    ``failed=True``; the best attempt so far, if any, stays selected.
    """
    scorer = scorer or Scorer()
    if cfg.alpha > 0 and note.reference_dialogue is None:
        raise DataValidationError(f"note {note.id}: alpha > 0 but no reference dialogue")

    trace = GenerationTrace(note_id=note.id, history_used=bool(history))
    prompt_note = note.text
    try:
        if approx_token_count(note.text) > cfg.token_gate:
            resp = backend.complete(
                ChatRequest(
                    prompt=backend.prompts.summarization(note.text, cfg.summary_target_tokens),
                    model=backend.model,
                    temperature=0.0,
                    max_output_tokens=cfg.summary_target_tokens * 2,
                    note_id=note.id,
                    purpose="summarize",
                )
            )
            trace.summarize_calls = 1
            trace.summarized = True
            trace.summary = prompt_note = resp.text.strip()

        previous: ScoreCard | None = None
        for iteration in range(1, cfg.max_iterations + 1):
            prompt = backend.prompts.generation(
                prompt_note,
                None if previous is None else previous.combined,
                cfg.alpha,
                history,
            )
            resp = backend.complete(
                ChatRequest(
                    prompt=prompt,
                    model=backend.model,
                    temperature=cfg.temperature,
                    max_output_tokens=cfg.max_output_tokens,
                    note_id=note.id,
                    purpose="generate",
                    iteration=iteration,
                )
            )
            trace.generate_calls += 1
            dialogue = parse_dialogue(resp.text)
            if not dialogue.labelled:
                log.info("note %s iteration %d: no speaker labels, scoring raw text", note.id, iteration)
            # always score against the original note, never the summary
            scores = scorer.score(note.text, dialogue, note.reference_dialogue, cfg.alpha)
            trace.attempts.append(DialogueAttempt(iteration, dialogue, scores))
            previous = scores
            if scores.combined >= cfg.threshold:
                trace.termination = THRESHOLD_MET
                break
        else:
            trace.termination = ITERATION_CAP
    except BackendError as exc:
        trace.failed = True
        trace.error = f"{type(exc).__name__}: {exc}"
        log.warning("note %s failed: %s", note.id, trace.error)

    if trace.attempts:
        trace.selected = select_best(trace.attempts)
    return trace


def run_note_with_history(
    patient_notes: Sequence[ClinicalNote],
    cfg: PipelineConfig,
    backend: Backend,
    scorer: Scorer | None = None,
) -> list[GenerationTrace]:
    """Run a patient's visits in order, feeding each visit the previous visit's selected dialogue."""
    traces = []
    history = None
    for note in patient_notes:
        trace = run_note(note, cfg, backend, scorer, history=history if cfg.history_mode else None)
        traces.append(trace)
        best = trace.selected_attempt
        history = best.dialogue.raw_text if best is not None else None
    return traces


def _failed_trace(note: ClinicalNote, exc: Exception) -> GenerationTrace:
    return GenerationTrace(note_id=note.id, failed=True, error=f"{type(exc).__name__}: {exc}")


def run_corpus(
    notes: Iterable[ClinicalNote],
    cfg: PipelineConfig,
    backend: Backend,
    scorer: Scorer | None = None,
    parallelism: int = 1,
) -> list[GenerationTrace]:
    """Run every note, at most ``parallelism`` at a time; output follows input order.

    In history mode a patient's visits run sequentially inside one worker.
    A note that fails is recorded as a failed trace and never stops the batch.
    """
    notes = list(notes)
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    ids = [n.id for n in notes]
    if len(set(ids)) != len(ids):
        raise DataValidationError("note ids must be unique")

    units = group_by_patient(notes) if cfg.history_mode else [[n] for n in notes]

    def run_unit(unit: list[ClinicalNote]) -> list[GenerationTrace]:
        try:
            if len(unit) == 1:
                return [run_note(unit[0], cfg, backend, scorer)]
            return run_note_with_history(unit, cfg, backend, scorer)
        except Exception as exc:  # isolate one bad unit from the rest of the batch
            log.exception("unit starting at note %s crashed", unit[0].id)
            return [_failed_trace(n, exc) for n in unit]

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        results = list(pool.map(run_unit, units))

    by_id = {t.note_id: t for batch in results for t in batch}
    return [by_id[i] for i in ids]


def with_alpha(cfg: PipelineConfig, alpha: float) -> PipelineConfig:
    return replace(cfg, alpha=alpha)


def dump_traces(traces: Sequence[GenerationTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(json.dumps(t.to_dict(), ensure_ascii=False) + "\n")


def load_traces(path: str | Path) -> list[GenerationTrace]:
    with open(path, encoding="utf-8") as fh:
        return [GenerationTrace.from_dict(json.loads(line)) for line in fh if line.strip()]
