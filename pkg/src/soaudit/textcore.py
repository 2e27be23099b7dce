"""Tokenized sentences, the single-word substitution operator, and token-level distance.

Sentences are plain tuples of lowercase tokens.  Every operator returns a new
tuple; nothing here mutates, so values can be shared freely between search
workers and used as dict/set keys.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

from .errors import EmptyInput, LengthMismatch, NotInPatchDomain

Token = str
Sentence = tuple[Token, ...]


class PatchPair(NamedTuple):
    """Ordered word pair: substituting ``p1 -> p2`` is the probe under audit.

    Synonym pairs drive robustness attacks, protected-token pairs (he/she,
    actor/actress, ...) drive bias estimation.
    """

    p1: Token
    p2: Token


def is_valid_token(text: str) -> bool:
    """True for a nonempty string with no whitespace characters."""
    return bool(text) and not any(ch.isspace() for ch in text)


def tokenize(text: str) -> Sentence:
    """Split raw text on whitespace runs and lowercase each piece.

    Inputs are expected pre-tokenized (space-separated, punctuation already
    split off), matching how SST-2 style corpora are distributed.

    Raises EmptyInput when no tokens remain.
    """
    tokens = tuple(piece.lower() for piece in text.split())
    if not tokens:
        raise EmptyInput("no tokens after whitespace splitting")
    return tokens


def as_sentence(tokens: Iterable[str]) -> Sentence:
    """Validate an already-tokenized sequence (used when deserializing)."""
    sent = tuple(tokens)
    if not sent:
        raise EmptyInput("sentence must have at least one token")
    for tok in sent:
        if not is_valid_token(tok):
            raise EmptyInput(f"invalid token {tok!r}: empty or contains whitespace")
    return sent


def detokenize(x: Sentence) -> str:
    """Space-join a sentence for transport to HTTP oracles."""
    return " ".join(x)


def occurrence_count(x: Sentence, t: Token) -> int:
    """Number of positions of ``x`` holding token ``t``."""
    return sum(1 for tok in x if tok == t)


def patch_position(x: Sentence, p1: Token) -> int:
    """Index of the unique occurrence of ``p1`` in ``x``.

    Raises NotInPatchDomain unless ``p1`` occurs exactly once; all substitution
    semantics are defined only on that domain.
    """
    count = occurrence_count(x, p1)
    if count != 1:
        raise NotInPatchDomain(f"token {p1!r} occurs {count} times, need exactly 1")
    return x.index(p1)


def apply_patch(x: Sentence, p: PatchPair) -> Sentence:
    """Replace the unique occurrence of ``p.p1`` with ``p.p2``.

    Length-preserving; ``x`` itself is never modified.
    """
    i = patch_position(x, p.p1)
    return x[:i] + (p.p2,) + x[i + 1 :]


def l0_distance(x: Sentence, y: Sentence) -> int:
    """Number of differing positions between two equal-length sentences."""
    if len(x) != len(y):
        raise LengthMismatch(f"sentence lengths differ: {len(x)} vs {len(y)}")
    return sum(1 for a, b in zip(x, y) if a != b)
