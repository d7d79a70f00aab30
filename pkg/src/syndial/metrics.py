"""Intrinsic dialogue metrics and the combined reward score.

* similarity      -- ROUGE-1 F1 of a generated dialogue against a reference dialogue
* extractiveness  -- ROUGE-1 F1 of a generated dialogue against its source note
* diversity       -- Self-BLEU over generated utterances (higher means less diverse)
* factuality      -- recall of stemmed medical concepts from the note in the dialogue
"""

from __future__ import annotations

import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .errors import EmptyConceptList, MissingReference, TooFewTexts
from .text import ngrams, porter_stem, tokenize

if TYPE_CHECKING:
    from .dialogue import Dialogue

ConceptSet = frozenset[str]


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def _prf(matches: int, hyp_len: int, ref_len: int) -> RougeScore:
    precision = matches / hyp_len if hyp_len else 0.0
    recall = matches / ref_len if ref_len else 0.0
    if precision + recall == 0:
        return RougeScore(precision, recall, 0.0)
    return RougeScore(precision, recall, 2 * precision * recall / (precision + recall))


def rouge1_f1(hypothesis: str, reference: str) -> RougeScore:
    """Unigram ROUGE with clipped counts.

    >>> rouge1_f1("the cat sat", "the cat").f1
    0.8
    """
    hyp = Counter(tokenize(hypothesis))
    ref = Counter(tokenize(reference))
    matches = sum(min(n, ref[w]) for w, n in hyp.items())
    return _prf(matches, sum(hyp.values()), sum(ref.values()))


def similarity(dialogue: Dialogue, reference_dialogue: str | None, *, strip_labels: bool = True) -> RougeScore:
    if reference_dialogue is None:
        raise MissingReference("no ground-truth dialogue for this note")
    return rouge1_f1(dialogue.metric_text(strip_labels=strip_labels), reference_dialogue)


def extractiveness(note_text: str, dialogue: Dialogue, *, strip_labels: bool = True) -> RougeScore:
    # direction: dialogue is the hypothesis, the note is the reference
    return rouge1_f1(dialogue.metric_text(strip_labels=strip_labels), note_text)


def combined_score(score_extr: float, score_sim: float | None, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if score_sim is None:
        if alpha > 0:
            raise ValueError("alpha > 0 requires a similarity score")
        return score_extr
    return (1 - alpha) * score_extr + alpha * score_sim


@dataclass(frozen=True)
class ScoreCard:
    extractiveness: float
    similarity: float | None
    alpha: float
    combined: float

    @classmethod
    def build(cls, extractiveness: float, similarity: float | None, alpha: float) -> ScoreCard:
        return cls(extractiveness, similarity, alpha, combined_score(extractiveness, similarity, alpha))

    def to_dict(self) -> dict:
        d: dict = {}
        if self.similarity is not None:
            d["similarity"] = self.similarity
        d.update(extractiveness=self.extractiveness, alpha=self.alpha, combined=self.combined)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ScoreCard:
        return cls(d["extractiveness"], d.get("similarity"), d["alpha"], d["combined"])


@dataclass(frozen=True)
class Scorer:
    """Scores one dialogue attempt. ``alpha`` is supplied per call by the pipeline."""

    strip_labels: bool = True

    def score(self, note_text: str, dialogue: Dialogue, reference: str | None, alpha: float) -> ScoreCard:
        extr = extractiveness(note_text, dialogue, strip_labels=self.strip_labels).f1
        sim = None
        if reference is not None:
            sim = similarity(dialogue, reference, strip_labels=self.strip_labels).f1
        return ScoreCard.build(extr, sim, alpha)


# --- Self-BLEU ---------------------------------------------------------------


class _RefIndex:
    """Per-n-gram top-two counts across a population, for leave-one-out max clipping."""

    def __init__(self, counts: list[Counter]):
        self.top: dict[tuple, tuple[int, int, int]] = {}
        for idx, c in enumerate(counts):
            for g, n in c.items():
                best, best_idx, second = self.top.get(g, (0, -1, 0))
                if n > best:
                    self.top[g] = (n, idx, best)
                elif n > second:
                    self.top[g] = (best, best_idx, n)

    def max_excluding(self, gram: tuple, idx: int) -> int:
        best, best_idx, second = self.top.get(gram, (0, -1, 0))
        return second if best_idx == idx else best


def self_bleu(utterances: Sequence[str], max_order: int = 4, epsilon: float = 1.0) -> float:
    """Mean sentence BLEU of each utterance against all the others.

    Uniform weights over orders ``1..max_order`` with clipped counts and a
    brevity penalty against the closest reference length.  An order whose
    clipped match count is zero contributes ``epsilon / total`` instead of 0.
    Orders longer than the hypothesis itself are left out and the weights
    renormalised, so identical texts always score 1.0.  A hypothesis with no
    tokens scores 0.
    """
    if len(utterances) < 2:
        raise TooFewTexts(f"Self-BLEU needs at least 2 texts, got {len(utterances)}")
    toks = [tokenize(u) for u in utterances]
    lengths = [len(t) for t in toks]
    indexes = [_RefIndex([ngrams(t, n) for t in toks]) for n in range(1, max_order + 1)]
    length_counts = Counter(lengths)

    total = 0.0
    for i, hyp in enumerate(toks):
        if not hyp:
            continue
        orders = min(max_order, len(hyp))
        log_p = 0.0
        for n in range(1, orders + 1):
            counts = ngrams(hyp, n)
            index = indexes[n - 1]
            clipped = sum(min(c, index.max_excluding(g, i)) for g, c in counts.items())
            denom = sum(counts.values())
            p = clipped / denom if clipped else epsilon / denom
            log_p += math.log(p) / orders
        ref_len = _closest_ref_len(len(hyp), length_counts)
        bp = 1.0 if len(hyp) > ref_len else math.exp(1 - ref_len / len(hyp))
        total += min(1.0, bp * math.exp(log_p))
    return total / len(toks)


def _closest_ref_len(hyp_len: int, length_counts: Counter) -> int:
    # the hypothesis's own length is removed from the pool first
    pool = length_counts.copy()
    pool[hyp_len] -= 1
    candidates = [r for r, n in pool.items() if n > 0]
    return min(candidates, key=lambda r: (abs(r - hyp_len), r))


def diversity(dialogues: Iterable[Dialogue], *, by_role: bool = True, **bleu_kwargs) -> float | None:
    """Corpus Self-BLEU over dialogue utterances.

    With ``by_role`` patient and doctor utterances form separate populations
    whose Self-BLEU values are averaged.  Roles with fewer than two non-empty
    utterances are skipped; if neither role qualifies, all utterances are
    pooled.  Returns None when fewer than two utterances exist overall.
    """
    pools: dict[str, list[str]] = {}
    for d in dialogues:
        for turn in d.turns:
            if tokenize(turn.utterance):
                pools.setdefault(turn.role, []).append(turn.utterance)
    if by_role:
        values = [self_bleu(pools[r], **bleu_kwargs) for r in ("patient", "doctor") if len(pools.get(r, ())) >= 2]
        if values:
            return sum(values) / len(values)
    everything = [u for us in pools.values() for u in us]
    if len(everything) < 2:
        return None
    return self_bleu(everything, **bleu_kwargs)


# --- factuality --------------------------------------------------------------

_LIST_MARKER = re.compile(r"^[\s\d.\-*•·+)\]]+")


def concept_key(phrase: str) -> str:
    return " ".join(porter_stem(t) for t in tokenize(phrase))


def build_concept_set(raw_lines: Iterable[str]) -> ConceptSet:
    """Normalise raw concept-extraction lines into stemmed keys.

    >>> sorted(build_concept_set(["1. Hypertension", "- Chest pains", "  "]))
    ['chest pain', 'hypertens']
    """
    keys = set()
    for line in raw_lines:
        key = concept_key(_LIST_MARKER.sub("", line.strip()))
        if key:
            keys.add(key)
    return frozenset(keys)


def concept_recall(note_concepts: ConceptSet, dialogue_concepts: ConceptSet) -> float:
    if not note_concepts:
        raise EmptyConceptList("no concepts extracted from the note")
    return len(note_concepts & dialogue_concepts) / len(note_concepts)
