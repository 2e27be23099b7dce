"""Neighborhood construction: natural sentences close to a center sentence.

One expansion step masks each non-frozen position, asks the fill-mask oracle
for candidates, keeps the ones whose logit clears a relative threshold, and
emits the center with that position substituted.  Distance-k neighborhoods are
built breadth-first from repeated one-step expansions and accumulate every
layer, so growing k never loses members.

Threshold rule for one masked position with logits L sorted nonincreasing:

    l_min = max(L[kappa], L[0] - delta)      (L[0] - delta alone if fewer
                                              than kappa+1 candidates)

and a candidate survives only with logit strictly greater than l_min.  That
keeps at most kappa candidates per position and drops anything far below the
best proposal.  The candidate equal to the current token is always dropped
(a no-op substitution), as are blacklisted tokens.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterator

from .errors import BudgetRequired
from .oracles.base import FillMaskOracle
from .textcore import Sentence, Token, is_valid_token

DEFAULT_KAPPA = 20
DEFAULT_DELTA = 3.0
DEFAULT_ENUM_CAP = 3


@dataclass(frozen=True)
class NeighborParams:
    """All knobs of neighborhood construction.

    ``k`` is the maximum substitution distance.  ``frozen_positions`` are
    never masked (the patch word stays put).  ``token_blacklist`` candidates
    are never substituted in (used to keep patch words and, in bias mode,
    gendered tokens out of the neighborhood).  Full enumeration is allowed
    only for k < ``enum_cap``; larger k must set ``sample_budget``, which
    prunes each breadth-first level to that many new sentences.
    """

    k: int
    kappa: int = DEFAULT_KAPPA
    delta: float = DEFAULT_DELTA
    frozen_positions: frozenset[int] = field(default_factory=frozenset)
    token_blacklist: frozenset[Token] = field(default_factory=frozenset)
    sample_budget: int | None = None
    enum_cap: int = DEFAULT_ENUM_CAP

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.sample_budget is not None and self.sample_budget < 1:
            raise ValueError("sample_budget must be >= 1 when set")
        # normalize plain sets passed by callers
        object.__setattr__(self, "frozen_positions", frozenset(self.frozen_positions))
        object.__setattr__(self, "token_blacklist", frozenset(self.token_blacklist))


@dataclass(frozen=True)
class NeighborSet:
    """The constructed neighborhood of ``center`` at distance ``k``.

    ``truncated`` is set when a sample budget pruned the expansion, in which
    case ``members`` is a seed-reproducible subset.
    """

    center: Sentence
    k: int
    members: frozenset[Sentence]
    truncated: bool = False


def kept_candidates(
    x: Sentence, index: int, params: NeighborParams, lm: FillMaskOracle
) -> tuple[Token, ...]:
    """Candidate tokens the logit threshold keeps for one masked position.

    Returned best-logit-first; at most ``params.kappa`` long.  Duplicated,
    invalid, blacklisted, and no-op candidates are dropped.
    """
    cands = lm.fill(x, index)
    if not cands.tokens:
        return ()
    logits = cands.logits
    l_min = logits[0] - params.delta
    if len(logits) > params.kappa:
        l_min = max(l_min, logits[params.kappa])
    kept: list[Token] = []
    seen: set[Token] = set()
    for tok, logit in zip(cands.tokens, logits):
        if logit <= l_min:
            break  # logits nonincreasing: nothing further can pass
        if tok == x[index] or tok in params.token_blacklist or tok in seen:
            continue
        if not is_valid_token(tok):
            continue
        seen.add(tok)
        kept.append(tok)
    return tuple(kept)


def neighbor_1(x: Sentence, params: NeighborParams, lm: FillMaskOracle) -> NeighborSet:
    """All single-substitution neighbors of ``x`` passing the threshold."""
    members: set[Sentence] = set()
    for i in range(len(x)):
        if i in params.frozen_positions:
            continue
        for tok in kept_candidates(x, i, params, lm):
            members.add(x[:i] + (tok,) + x[i + 1 :])
    return NeighborSet(center=x, k=1, members=frozenset(members))


class _BreadthFirst:
    """Layered expansion shared by neighbor_k, neighbor_stream, and the attacks.

    Yields one layer of newly discovered sentences at a time, in canonical
    (lexicographic token sequence) order, together with the parent each was
    first generated from.  Already-seen sentences are re-collected into a
    layer's raw set but never yielded or expanded twice.
    """

    def __init__(
        self,
        x: Sentence,
        params: NeighborParams,
        lm: FillMaskOracle,
        rng: random.Random | None = None,
    ):
        if params.sample_budget is not None and rng is None:
            raise ValueError("sample_budget requires an rng")
        self._x = x
        self._params = params
        self._lm = lm
        self._rng = rng
        self.truncated = False

    def layers(self, max_depth: int) -> Iterator[tuple[int, list[tuple[Sentence, Sentence]]]]:
        params, lm = self._params, self._lm
        budget = params.sample_budget
        yielded: set[Sentence] = set()
        expanded: set[Sentence] = {self._x}
        frontier: list[Sentence] = [self._x]
        for depth in range(1, max_depth + 1):
            layer: dict[Sentence, Sentence] = {}
            for member in frontier:
                for neighbor in sorted(neighbor_1(member, params, lm).members):
                    layer.setdefault(neighbor, member)
            new = [s for s in sorted(layer) if s not in yielded]
            if budget is not None and len(new) > budget:
                new = sorted(self._rng.sample(new, budget))
                self.truncated = True
            if not new:
                return
            yield depth, [(s, layer[s]) for s in new]
            yielded.update(new)
            frontier = [s for s in new if s not in expanded]
            expanded.update(frontier)


def _check_enumerable(params: NeighborParams) -> None:
    if params.k >= params.enum_cap and params.sample_budget is None:
        raise BudgetRequired(
            f"k={params.k} is at or above the enumeration cap {params.enum_cap}; "
            "set a sample_budget"
        )


def neighbor_k(
    x: Sentence,
    params: NeighborParams,
    lm: FillMaskOracle,
    rng: random.Random | None = None,
) -> NeighborSet:
    """Distance-``params.k`` neighborhood of ``x``.

    k=0 is exactly ``{x}``.  For k >= 1 the result is the union of all
    breadth-first layers up to depth k; the center re-enters only if some
    expansion path leads back to it.
    """
    if params.k == 0:
        return NeighborSet(center=x, k=0, members=frozenset({x}))
    _check_enumerable(params)
    bfs = _BreadthFirst(x, params, lm, rng)
    members: set[Sentence] = set()
    for _, pairs in bfs.layers(params.k):
        members.update(s for s, _ in pairs)
    return NeighborSet(center=x, k=params.k, members=frozenset(members), truncated=bfs.truncated)


def neighbor_stream(
    x: Sentence,
    params: NeighborParams,
    lm: FillMaskOracle,
    rng: random.Random | None = None,
) -> Iterator[Sentence]:
    """Lazily yield neighborhood members grouped by ascending construction depth.

    The first block of yields equals the distance-1 neighbors; each sentence
    appears exactly once; order within a depth is canonical, so the stream is
    deterministic for a deterministic oracle (and fixed seed when sampling).
    The center itself is not yielded.
    """
    if params.k == 0:
        return
    _check_enumerable(params)
    bfs = _BreadthFirst(x, params, lm, rng)
    for _, pairs in bfs.layers(params.k):
        for sentence, _ in pairs:
            yield sentence
