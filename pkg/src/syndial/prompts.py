"""Prompt templates and builders.

Templates live as text files in ``syndial/templates``; pass ``template_dir``
to :class:`PromptSet` to swap in a directory with files of the same names.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

DIALOGUE_CUE = "Dialogue:"
DEFAULT_SUMMARY_TOKENS = 300

_NAMES = ("generate", "feedback", "history", "summarize", "extract_concepts")


def fmt_number(x: float) -> str:
    """Render a score or weight the way a person would type it: 0.9, 0.42, 0.5219."""
    return f"{round(x, 4):g}"


def approx_token_count(text: str) -> int:
    """ceil(4/3 * whitespace words); a stand-in for a real tokenizer."""
    return math.ceil(4 * len(text.split()) / 3)


@dataclass(frozen=True)
class PromptSet:
    generate: str
    feedback: str
    history: str
    summarize: str
    extract_concepts: str

    @classmethod
    def load(cls, template_dir: str | Path | None = None) -> PromptSet:
        texts = {}
        for name in _NAMES:
            if template_dir is not None and (Path(template_dir) / f"{name}.txt").exists():
                texts[name] = (Path(template_dir) / f"{name}.txt").read_text(encoding="utf-8")
            else:
                texts[name] = resources.files("syndial.templates").joinpath(f"{name}.txt").read_text(encoding="utf-8")
        return cls(**{k: v.strip("\n") for k, v in texts.items()})

    def generation(
        self,
        note_text: str,
        previous_combined: float | None = None,
        alpha: float = 0.0,
        history: str | None = None,
    ) -> str:
        if previous_combined is None:
            body = self.generate.format(note=note_text)
        else:
            body = self.feedback.format(
                note=note_text,
                score=fmt_number(previous_combined),
                extr_weight=fmt_number(1 - alpha),
                sim_weight=fmt_number(alpha),
            )
        parts = [body]
        if history:
            parts.append(self.history.format(history=history))
        parts.append(DIALOGUE_CUE)
        return "\n\n".join(parts)

    def summarization(self, note_text: str, target_tokens: int = DEFAULT_SUMMARY_TOKENS) -> str:
        return self.summarize.format(note=note_text, target_tokens=target_tokens)

    def extraction(self, text: str) -> str:
        return self.extract_concepts.format(text=text)


_DEFAULT: PromptSet | None = None


def default_prompts() -> PromptSet:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = PromptSet.load()
    return _DEFAULT


def build_generation_prompt(note_text, previous=None, alpha=0.0, history=None) -> str:
    """Generation prompt; ``previous`` is the prior attempt's ScoreCard, if any."""
    prev = None if previous is None else previous.combined
    return default_prompts().generation(note_text, prev, alpha, history)


def build_summarization_prompt(note_text: str, target_tokens: int = DEFAULT_SUMMARY_TOKENS) -> str:
    return default_prompts().summarization(note_text, target_tokens)
