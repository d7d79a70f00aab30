import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import scan_tokens
from syndial.text import ngrams, tokenize


@pytest.mark.parametrize(
    "text, expected",
    [
        ("The cat sat.", ["the", "cat", "sat"]),
        ("", []),
        ("Doctor: BP 120/80", ["doctor", "bp", "120", "80"]),
        ("snake_case--and  tabs\there", ["snake", "case", "and", "tabs", "here"]),
        ("Café naïve", ["café", "naïve"]),
    ],
)
def test_tokenize_examples(text, expected):
    assert tokenize(text) == expected


def test_bp_example_matches_character_scanner():
    assert tokenize("Doctor: BP 120/80") == scan_tokens("Doctor: BP 120/80")


@given(st.text())
def test_tokenize_agrees_with_character_scanner(text):
    assert tokenize(text) == scan_tokens(text)


@given(st.text())
def test_tokens_are_lowercase_alphanumeric(text):
    for tok in tokenize(text):
        assert tok
        assert all(ch.isalnum() for ch in tok)
        assert tok == tok.lower()


@given(st.text())
def test_tokenize_idempotent_on_joined_output(text):
    once = tokenize(text)
    assert tokenize(" ".join(once)) == once


@pytest.mark.parametrize(
    "seq, order, expected",
    [
        (["a", "b", "a"], 1, {("a",): 2, ("b",): 1}),
        (["a", "b", "a"], 2, {("a", "b"): 1, ("b", "a"): 1}),
        (["a"], 2, {}),
    ],
)
def test_ngrams_examples(seq, order, expected):
    assert dict(ngrams(seq, order)) == expected


def test_ngrams_rejects_order_zero():
    with pytest.raises(ValueError):
        ngrams(["a"], 0)


@given(st.lists(st.sampled_from("abcde"), max_size=20), st.integers(1, 6))
def test_ngram_total_count(seq, order):
    counts = ngrams(seq, order)
    assert sum(counts.values()) == max(0, len(seq) - order + 1)
    assert all(len(k) == order for k in counts)
