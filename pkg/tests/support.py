"""Shared test machinery: scripted oracles, random instance generation, and an
independent brute-force oracle for neighborhoods and attacks.

The brute-force pieces deliberately re-derive everything straight from the
fill-mask output and the hard-label rule, without touching the package's
search code, so they can serve as ground truth for it.
"""

from __future__ import annotations

import random

from soaudit.oracles.base import MaskCandidates
from soaudit.oracles.builtin import BigramFillMask, LinearClassifier
from soaudit.textcore import PatchPair


class FakeClassifier:
    """Classifier scripted by a sentence -> probability table."""

    def __init__(self, table=None, default=0.9):
        self.table = {tuple(k): v for k, v in (table or {}).items()}
        self.default = default

    def predict_soft(self, batch):
        return [self.table.get(tuple(x), self.default) for x in batch]


class FakeFillMask:
    """Fill-mask scripted by a (sentence, index) -> ((token, logit), ...) table."""

    def __init__(self, table=None):
        self.table = {(tuple(x), i): tuple(v) for (x, i), v in (table or {}).items()}

    def fill(self, x, index):
        entries = self.table.get((tuple(x), index), ())
        return MaskCandidates(
            tokens=tuple(t for t, _ in entries),
            logits=tuple(l for _, l in entries),
        )


# ---------------------------------------------------------------------------
# Independent brute-force oracle (written before the search implementations).
# ---------------------------------------------------------------------------


def naive_kept(x, i, params, lm):
    """Candidates surviving the logit threshold, recomputed from scratch."""
    cands = lm.fill(x, i)
    pairs = list(zip(cands.tokens, cands.logits))
    if not pairs:
        return []
    logits = [l for _, l in pairs]
    l_min = logits[0] - params.delta
    if len(logits) >= params.kappa + 1:
        l_min = max(l_min, logits[params.kappa])
    kept, seen = [], set()
    for t, l in pairs:
        if l <= l_min:
            continue
        if t == x[i] or t in params.token_blacklist or t in seen:
            continue
        if not t or any(ch.isspace() for ch in t):
            continue
        seen.add(t)
        kept.append(t)
    return kept


def naive_neighbor_1(x, params, lm):
    out = set()
    for i in range(len(x)):
        if i in params.frozen_positions:
            continue
        for t in naive_kept(x, i, params, lm):
            out.add(x[:i] + (t,) + x[i + 1 :])
    return out


def naive_neighbor_members(x, k, params, lm):
    """Literal recursive construction, lower layers accumulated."""
    if k == 0:
        return {x}
    one = naive_neighbor_1(x, params, lm)
    members = set(one)
    for m in one:
        members |= naive_neighbor_members(m, k - 1, params, lm)
    return members


def naive_apply(x, p: PatchPair):
    assert sum(1 for t in x if t == p.p1) == 1
    i = x.index(p.p1)
    return x[:i] + (p.p2,) + x[i + 1 :]


def naive_l0(x, y):
    assert len(x) == len(y)
    return sum(1 for a, b in zip(x, y) if a != b)


def naive_flip(x, p: PatchPair, classifier) -> bool:
    probs = classifier.predict_soft([x, naive_apply(x, p)])
    return (probs[1] >= 0.5) != (probs[0] >= 0.5)


def exhaustive_attack(x0, p: PatchPair, k, params, classifier, lm):
    """Score every neighborhood member (the center included) exhaustively.

    Returns (found, minimal distance over all flipping members).
    """
    members = {x0} | naive_neighbor_members(x0, k, params, lm)
    flip_distances = [
        naive_l0(x0, m) for m in sorted(members) if naive_flip(m, p, classifier)
    ]
    if not flip_distances:
        return False, None
    return True, min(flip_distances)


# ---------------------------------------------------------------------------
# Random instance generation for the equivalence and invariant suites.
# ---------------------------------------------------------------------------


def random_instance(
    rng: random.Random,
    vocab_size: int = 20,
    corpus_sentences: int = 30,
    max_len: int = 8,
):
    """A small world: vocabulary, bigram corpus, input with one patch word.

    Returns (x0, pair, classifier, fillmask).
    """
    vocab = [f"w{j:02d}" for j in range(vocab_size)]
    corpus = [
        tuple(rng.choice(vocab) for _ in range(rng.randint(2, max_len)))
        for _ in range(corpus_sentences)
    ]
    p1, p2 = rng.sample(vocab, 2)
    length = rng.randint(2, max_len)
    others = [t for t in vocab if t != p1]
    tokens = [rng.choice(others) for _ in range(length)]
    tokens[rng.randrange(length)] = p1
    x0 = tuple(tokens)
    weights = {t: rng.uniform(-2.5, 2.5) for t in vocab}
    classifier = LinearClassifier(weights, bias=rng.uniform(-0.5, 0.5))
    return x0, PatchPair(p1, p2), classifier, BigramFillMask(corpus)
