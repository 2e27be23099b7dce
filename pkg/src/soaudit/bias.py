"""Counterfactual token bias: expected soft-prediction shift under a protected
token substitution, averaged over the neighborhood of a test set.

The shift for one sentence is f_soft(x patched) - f_soft(x).  For small k the
estimate is the exact mean over the deduplicated union of the per-example
neighborhoods; above the enumeration cap it is a seeded uniform subsample per
test example with a standard error.  Patch positions are frozen and both
patch words (plus any user blacklist, e.g. gendered tokens) are excluded as
candidates, so the substitution stays well defined on every constructed
sentence.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import BudgetRequired, EmptyNeighborhood
from .neighborhood import NeighborParams, neighbor_k
from .oracles.base import OracleSuite
from .rng import stream_rng
from .textcore import PatchPair, Sentence, apply_patch, occurrence_count, patch_position

HISTOGRAM_BINS = 61  # uniform bins over [-1, 1]


@dataclass(frozen=True)
class BiasEstimate:
    """Estimated prediction shift for one pair at one neighborhood distance."""

    pair: PatchPair
    k: int
    mean: float
    sample_count: int
    stderr: float | None
    exact: bool
    histogram: tuple[int, ...]
    skipped_examples: int
    truncated: bool


@dataclass(frozen=True)
class FilteredTestSet:
    """Test sentences whose direct shift is strictly below epsilon.

    Used to demonstrate hidden bias: on these sentences the naive per-example
    measurement sees (almost) nothing.
    """

    pair: PatchPair
    epsilon: float
    members: tuple[Sentence, ...]


def soft_diff(x: Sentence, p: PatchPair, classifier) -> float:
    """f_soft(x patched) - f_soft(x); range [-1, 1]."""
    patched = apply_patch(x, p)
    probs = classifier.predict_soft([x, patched])
    return probs[1] - probs[0]


def bias_mode_params(base: NeighborParams, k: int, x0: Sentence, p: PatchPair) -> NeighborParams:
    """Freeze the patch position and blacklist both patch words."""
    pos = patch_position(x0, p.p1)
    return replace(
        base,
        k=k,
        frozen_positions=base.frozen_positions | {pos},
        token_blacklist=base.token_blacklist | {p.p1, p.p2},
    )


def histogram(values: Sequence[float], bins: int = HISTOGRAM_BINS) -> tuple[int, ...]:
    """Counts over ``bins`` uniform bins spanning [-1, 1]; values clamp to the edges."""
    counts = [0] * bins
    for v in values:
        idx = int((v + 1.0) * bins / 2.0)
        counts[min(max(idx, 0), bins - 1)] += 1
    return tuple(counts)


def _batched_diffs(members: Sequence[Sentence], p: PatchPair, classifier) -> list[float]:
    patched = [apply_patch(m, p) for m in members]
    probs = classifier.predict_soft(list(members) + patched)
    n = len(members)
    return [b - a for a, b in zip(probs[:n], probs[n:])]


def _mean(values: Sequence[float]) -> float:
    # fsum is exactly rounded, so the mean is independent of summation order
    return math.fsum(values) / len(values)


def _stderr(values: Sequence[float], mean: float) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return math.sqrt(var / n)


def bias_estimate(
    test_set: Sequence[Sentence],
    p: PatchPair,
    k: int,
    params: NeighborParams,
    oracles: OracleSuite,
    seed: int = 0,
    rng: random.Random | None = None,
) -> BiasEstimate:
    """Estimate the expected shift for pair ``p`` at distance ``k``.

    Test sentences without exactly one occurrence of the first patch word are
    skipped and counted.  Exact mode (k below the enumeration cap) averages
    over the deduplicated union of neighborhoods.  Sampled mode draws up to
    ``params.sample_budget`` members per test example and reports a standard
    error; draws are not deduplicated across examples.
    """
    applicable = [x for x in test_set if occurrence_count(x, p.p1) == 1]
    skipped = len(test_set) - len(applicable)
    exact = k < params.enum_cap

    truncated = False
    if exact:
        union: set[Sentence] = set()
        for x0 in applicable:
            # exact mode enumerates fully; a sample budget set for higher
            # distances (e.g. on a shared curve config) must not prune here
            exact_params = replace(bias_mode_params(params, k, x0, p), sample_budget=None)
            union |= neighbor_k(x0, exact_params, oracles.fillmask).members
        if not union:
            raise EmptyNeighborhood(f"no sentences to average for pair {p}")
        members = sorted(union)
        diffs = _batched_diffs(members, p, oracles.classifier)
        mean = _mean(diffs)
        return BiasEstimate(
            pair=p, k=k, mean=mean, sample_count=len(diffs), stderr=None,
            exact=True, histogram=histogram(diffs), skipped_examples=skipped,
            truncated=False,
        )

    if params.sample_budget is None:
        raise BudgetRequired(
            f"k={k} is at or above the enumeration cap {params.enum_cap}; set a sample_budget"
        )
    if rng is None:
        rng = stream_rng(seed, "bias-sampling")
    draws: list[Sentence] = []
    for x0 in applicable:
        member_set = neighbor_k(x0, bias_mode_params(params, k, x0, p), oracles.fillmask, rng)
        truncated = truncated or member_set.truncated
        members = sorted(member_set.members)
        if not members:
            continue
        take = min(params.sample_budget, len(members))
        draws.extend(sorted(rng.sample(members, take)))
    if not draws:
        raise EmptyNeighborhood(f"no sentences to average for pair {p}")
    diffs = _batched_diffs(draws, p, oracles.classifier)
    mean = _mean(diffs)
    return BiasEstimate(
        pair=p, k=k, mean=mean, sample_count=len(diffs),
        stderr=_stderr(diffs, mean), exact=False, histogram=histogram(diffs),
        skipped_examples=skipped, truncated=truncated,
    )


def bias_curve(
    test_set: Sequence[Sentence],
    p: PatchPair,
    k_max: int,
    params: NeighborParams,
    oracles: OracleSuite,
    seed: int = 0,
) -> list[BiasEstimate]:
    """Estimates for every distance 0..k_max, smallest first.

    All distances share one oracle suite, so the classifier memo cache is
    reused across the curve; each sampled distance draws from its own seeded
    stream so adding a point never disturbs the others.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    estimates = []
    for k in range(k_max + 1):
        rng = stream_rng(seed, f"bias-sampling/k={k}")
        estimates.append(bias_estimate(test_set, p, k, params, oracles, seed=seed, rng=rng))
    return estimates


def filter_test_set(
    test_set: Sequence[Sentence],
    p: PatchPair,
    epsilon: float,
    classifier,
) -> FilteredTestSet:
    """Keep the applicable test sentences whose |shift| is strictly below epsilon."""
    applicable = [x for x in test_set if occurrence_count(x, p.p1) == 1]
    if not applicable:
        return FilteredTestSet(pair=p, epsilon=epsilon, members=())
    diffs = _batched_diffs(applicable, p, classifier)
    members = tuple(x for x, d in zip(applicable, diffs) if abs(d) < epsilon)
    return FilteredTestSet(pair=p, epsilon=epsilon, members=members)
