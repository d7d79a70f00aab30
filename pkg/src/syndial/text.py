"""Word tokenization and n-gram counting shared by every metric."""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Sequence

from .porter import porter_stem

__all__ = ["tokenize", "ngrams", "porter_stem"]

# \w minus underscore == str.isalnum(), Unicode aware
_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on every run of non-alphanumeric characters.

    >>> tokenize("Doctor: BP 120/80")
    ['doctor', 'bp', '120', '80']
    """
    return _TOKEN_RE.findall(text.lower())


def ngrams(tokens: Sequence[str], order: int) -> Counter[tuple[str, ...]]:
    """Sliding-window n-grams of ``tokens`` with multiplicity."""
    if order < 1:
        raise ValueError(f"n-gram order must be >= 1, got {order}")
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))
