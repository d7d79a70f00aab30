"""Synthetic patient-physician dialogue generation from clinical notes, with evaluation metrics."""

from .corpus import ClinicalNote, ColumnMap, Corpus, load_corpus, load_csv, load_jsonl, save_dialogues
from .dialogue import Dialogue, Turn, parse_dialogue
from .harness import alpha_sweep, cost_report, evaluate_corpus, iteration_report, robustness, run_stats
from .llm import CallLedger, ChatRequest, ChatResponse, MockBackend, OpenAIBackend
from .metrics import (
    RougeScore,
    ScoreCard,
    Scorer,
    build_concept_set,
    combined_score,
    concept_recall,
    diversity,
    extractiveness,
    rouge1_f1,
    self_bleu,
    similarity,
)
from .pipeline import GenerationTrace, PipelineConfig, run_corpus, run_note, run_note_with_history
from .text import ngrams, porter_stem, tokenize

__version__ = "0.1.0"
