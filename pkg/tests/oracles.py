"""Brute-force reference implementations used only by the tests.

Written deliberately differently from the package code: character scanning
instead of regexes, greedy token matching instead of Counter clipping, and
list.count enumeration instead of indexed n-gram tables.
"""

import math


def scan_tokens(text):
    tokens, current = [], []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


def rouge1_oracle(hyp_tokens, ref_tokens):
    used = [False] * len(ref_tokens)
    matches = 0
    for h in hyp_tokens:
        for j, r in enumerate(ref_tokens):
            if not used[j] and r == h:
                used[j] = True
                matches += 1
                break
    p = matches / len(hyp_tokens) if hyp_tokens else 0.0
    r = matches / len(ref_tokens) if ref_tokens else 0.0
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f


def _grams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def bleu_oracle(hyp, refs, max_order=4, epsilon=1.0):
    if not hyp:
        return 0.0
    orders = min(max_order, len(hyp))
    product = 1.0
    for n in range(1, orders + 1):
        hg = _grams(hyp, n)
        ref_grams = [_grams(r, n) for r in refs]
        clipped = 0
        for g in set(hg):
            clipped += min(hg.count(g), max(rg.count(g) for rg in ref_grams))
        p = clipped / len(hg) if clipped else epsilon / len(hg)
        product *= p
    geo = product ** (1.0 / orders)
    ref_len = min((len(r) for r in refs), key=lambda L: (abs(L - len(hyp)), L))
    bp = 1.0 if len(hyp) > ref_len else math.exp(1 - ref_len / len(hyp))
    return bp * geo


def self_bleu_oracle(texts, **kw):
    toks = [scan_tokens(t) for t in texts]
    scores = [bleu_oracle(toks[i], toks[:i] + toks[i + 1:], **kw) for i in range(len(toks))]
    return sum(scores) / len(scores)
