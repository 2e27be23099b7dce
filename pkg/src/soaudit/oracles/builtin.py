"""Deterministic in-process oracle backends.

These stand in for served models during tests and smoke runs: a bag-of-words
logistic classifier, a bigram-count fill-mask proposer, and an add-one
smoothed bigram perplexity scorer.  All three are pure functions of their
construction data, so repeated queries are bit-identical.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Mapping, Sequence

from ..textcore import Sentence, Token
from .base import MaskCandidates


def logistic(z: float) -> float:
    """Overflow-safe standard logistic function."""
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


class LinearClassifier:
    """Bag-of-words logistic scorer: p = logistic(bias + sum of token weights).

    Tokens without a weight contribute zero.
    """

    def __init__(self, weights: Mapping[Token, float], bias: float = 0.0):
        self._weights = dict(weights)
        self._bias = float(bias)

    def predict_soft(self, batch: Sequence[Sentence]) -> list[float]:
        w = self._weights
        return [
            logistic(self._bias + sum(w.get(tok, 0.0) for tok in x)) for x in batch
        ]


def fit_log_odds_classifier(
    examples: Sequence[tuple[Sentence, int]], smoothing: float = 1.0
) -> LinearClassifier:
    """Fit a LinearClassifier from labeled sentences by smoothed log-count ratios.

    Naive-Bayes style: each token's weight is the log ratio of its smoothed
    relative frequency in positive vs negative examples; the bias is the log
    class prior ratio.  Deterministic, training-free, and good enough to act
    as the built-in victim for smoke runs.
    """
    pos: Counter[Token] = Counter()
    neg: Counter[Token] = Counter()
    n_pos = n_neg = 0
    for x, label in examples:
        if label == 1:
            pos.update(x)
            n_pos += 1
        else:
            neg.update(x)
            n_neg += 1
    vocab = set(pos) | set(neg)
    v = max(len(vocab), 1)
    pos_total = sum(pos.values()) + smoothing * v
    neg_total = sum(neg.values()) + smoothing * v
    weights = {
        tok: math.log((pos[tok] + smoothing) / pos_total)
        - math.log((neg[tok] + smoothing) / neg_total)
        for tok in sorted(vocab)
    }
    bias = math.log((n_pos + smoothing) / (n_neg + smoothing))
    return LinearClassifier(weights, bias)


class BigramFillMask:
    """Mask filler scored from corpus bigram counts.

    A candidate token t for position i scores log(1 + c) where c is the number
    of corpus bigrams (x[i-1], t) plus (t, x[i+1]); missing context sides
    contribute nothing.  All tokens with positive score are returned sorted by
    score descending, ties broken lexicographically.  A single-token sentence
    has no context at all and falls back to unigram counts.
    """

    def __init__(self, corpus: Iterable[Sentence]):
        self._after: dict[Token, Counter[Token]] = {}
        self._before: dict[Token, Counter[Token]] = {}
        self._unigram: Counter[Token] = Counter()
        for sent in corpus:
            self._unigram.update(sent)
            for a, b in zip(sent, sent[1:]):
                self._after.setdefault(a, Counter())[b] += 1
                self._before.setdefault(b, Counter())[a] += 1

    def fill(self, x: Sentence, index: int) -> MaskCandidates:
        if not 0 <= index < len(x):
            raise IndexError(f"mask index {index} out of range for length {len(x)}")
        counts: Counter[Token] = Counter()
        if len(x) == 1:
            counts.update(self._unigram)
        else:
            if index > 0:
                counts.update(self._after.get(x[index - 1], {}))
            if index < len(x) - 1:
                counts.update(self._before.get(x[index + 1], {}))
        scored = sorted(
            ((math.log1p(c), t) for t, c in counts.items() if c > 0),
            key=lambda item: (-item[0], item[1]),
        )
        return MaskCandidates(
            tokens=tuple(t for _, t in scored),
            logits=tuple(s for s, _ in scored),
        )


class BigramPerplexity:
    """Add-one smoothed bigram language model perplexity.

    Unknown tokens share a single UNK bucket; a sentence-start marker seeds
    the first bigram.  Always positive and deterministic.
    """

    _BOS = None  # sentinel context key, cannot collide with real tokens
    _UNK = ("<unk>",)  # tuple sentinel, likewise collision-free

    def __init__(self, corpus: Iterable[Sentence]):
        self._bigrams: Counter = Counter()
        self._context: Counter = Counter()
        vocab: set[Token] = set()
        for sent in corpus:
            prev = self._BOS
            for tok in sent:
                vocab.add(tok)
                self._bigrams[(prev, tok)] += 1
                self._context[prev] += 1
                prev = tok
        self._vocab = vocab
        # +1 for the UNK bucket
        self._v = len(vocab) + 1

    def _key(self, tok: Token):
        return tok if tok in self._vocab else self._UNK

    def ppl(self, x: Sentence) -> float:
        log_prob = 0.0
        prev = self._BOS
        for tok in x:
            key = self._key(tok)
            count = self._bigrams.get((prev, key), 0)
            total = self._context.get(prev, 0)
            log_prob += math.log((count + 1.0) / (total + self._v))
            prev = key
        return math.exp(-log_prob / len(x))
