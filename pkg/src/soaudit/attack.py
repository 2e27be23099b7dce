"""Second-order attacks: find sentences near an input whose prediction flips
under a single synonym substitution.

Two searches are provided.  The enumerating attack walks the neighborhood in
ascending construction depth and returns the first flip, so a hit is a
smallest perturbation.  The beam attack scores candidates with a cross-entropy
style loss over the (sentence, patched sentence) probability pair and keeps
the best beta sentences per depth, trading completeness for speed at larger
distances.  A random-walk baseline calibrates how much the loss guidance buys.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .errors import NoApplicablePatch
from .neighborhood import (
    NeighborParams,
    _BreadthFirst,
    _check_enumerable,
    kept_candidates,
    neighbor_1,
)
from .oracles.base import CallStats, OracleSuite, hard_label
from .rng import stream_rng
from .textcore import (
    PatchPair,
    Sentence,
    apply_patch,
    l0_distance,
    occurrence_count,
    patch_position,
)

LOSS_EPSILON = 1e-12

DEFAULT_BEAM_WIDTH = 20
DEFAULT_TRIALS = 50

STATUS_FOUND = "found"
STATUS_NOT_FOUND = "not_found"


@dataclass(frozen=True)
class AttackConfig:
    """Search budget and knobs shared by all attack methods."""

    k: int
    beam_width: int = DEFAULT_BEAM_WIDTH
    neighbor: NeighborParams = field(default_factory=lambda: NeighborParams(k=1))
    trials: int = DEFAULT_TRIALS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class AttackResult:
    """Outcome of one attack on one input sentence.

    When ``status`` is found, ``vulnerable`` flips under the patch,
    ``distance`` is its substitution distance from the input, and ``chain``
    is the expansion path input -> ... -> vulnerable (one substitution per
    step) recorded during the search.
    """

    status: str
    patch: PatchPair
    vulnerable: Sentence | None
    distance: int | None
    iterations: int
    chain: tuple[Sentence, ...]
    loss_trace: tuple[float, ...]
    classifier_calls: CallStats
    fillmask_calls: CallStats
    wall_time_s: float

    @property
    def found(self) -> bool:
        return self.status == STATUS_FOUND


def attack_mode_params(base: NeighborParams, k: int, x0: Sentence, p: PatchPair) -> NeighborParams:
    """Neighborhood params specialized to one (sentence, patch) attack.

    The patch-word position is frozen and both patch words are blacklisted as
    candidates, so every constructed sentence keeps exactly one occurrence of
    the first patch word and the substitution stays well defined.
    """
    pos = patch_position(x0, p.p1)
    return replace(
        base,
        k=k,
        frozen_positions=base.frozen_positions | {pos},
        token_blacklist=base.token_blacklist | {p.p1, p.p2},
    )


def prediction_diff(x: Sentence, p: PatchPair, classifier) -> int:
    """Hard-label difference f(x patched) - f(x), in {-1, 0, 1}."""
    patched = apply_patch(x, p)
    probs = classifier.predict_soft([x, patched])
    return hard_label(probs[1]) - hard_label(probs[0])


def select_patch(
    x0: Sentence, synonyms: Sequence[PatchPair], classifier
) -> PatchPair:
    """Pick the patch pair with the largest single-word probability gap.

    Only pairs whose first word occurs exactly once in ``x0`` are considered.
    Each word's probability is the classifier applied to the one-token
    sentence.  Ties keep the earliest pair in lexicon order.
    """
    applicable = [p for p in synonyms if occurrence_count(x0, p.p1) == 1]
    if not applicable:
        raise NoApplicablePatch(f"no pair applies to {' '.join(x0)!r}")
    singles: list[Sentence] = []
    for p in applicable:
        singles.append((p.p1,))
        singles.append((p.p2,))
    probs = classifier.predict_soft(singles)
    best_pair = applicable[0]
    best_gap = -1.0
    for i, p in enumerate(applicable):
        gap = abs(probs[2 * i + 1] - probs[2 * i])
        if gap > best_gap:
            best_pair, best_gap = p, gap
    return best_pair


def loss_from_probs(prob_plain: float, prob_patched: float) -> float:
    """Search loss over the probability pair: -log(1 - f_min) - log(f_max).

    Minimized as the smaller probability heads to 0 and the larger to 1,
    i.e. exactly when the pair straddles the decision boundary hard.  Logs
    are clamped at LOSS_EPSILON so saturated probabilities stay finite.
    """
    f_min = min(prob_plain, prob_patched)
    f_max = max(prob_plain, prob_patched)
    return -math.log(max(1.0 - f_min, LOSS_EPSILON)) - math.log(max(f_max, LOSS_EPSILON))


def beam_loss(x: Sentence, p: PatchPair, classifier) -> float:
    """loss_from_probs evaluated on (x, x patched)."""
    patched = apply_patch(x, p)
    probs = classifier.predict_soft([x, patched])
    return loss_from_probs(probs[0], probs[1])


def _batched_diffs(
    members: Sequence[Sentence], p: PatchPair, classifier
) -> tuple[list[int], list[float], list[float]]:
    """Hard-label diffs plus both soft probabilities for a candidate batch."""
    patched = [apply_patch(m, p) for m in members]
    probs = classifier.predict_soft(list(members) + patched)
    n = len(members)
    plain, shifted = probs[:n], probs[n:]
    diffs = [hard_label(b) - hard_label(a) for a, b in zip(plain, shifted)]
    return diffs, plain, shifted


def _result(
    status: str,
    p: PatchPair,
    oracles: OracleSuite,
    base_stats: tuple[CallStats, CallStats],
    started: float,
    *,
    vulnerable: Sentence | None = None,
    distance: int | None = None,
    iterations: int = 0,
    chain: tuple[Sentence, ...] = (),
    loss_trace: tuple[float, ...] = (),
) -> AttackResult:
    clf, fm = oracles.snapshot()
    return AttackResult(
        status=status,
        patch=p,
        vulnerable=vulnerable,
        distance=distance,
        iterations=iterations,
        chain=chain,
        loss_trace=loss_trace,
        classifier_calls=clf.delta(base_stats[0]),
        fillmask_calls=fm.delta(base_stats[1]),
        wall_time_s=time.perf_counter() - started,
    )


def _chain_to(target: Sentence, x0: Sentence, parents: dict[Sentence, Sentence]) -> tuple[Sentence, ...]:
    chain = [target]
    while chain[-1] != x0:
        chain.append(parents[chain[-1]])
    chain.reverse()
    return tuple(chain)


def so_enum(
    x0: Sentence,
    p: PatchPair,
    cfg: AttackConfig,
    oracles: OracleSuite,
    rng=None,
) -> AttackResult:
    """Enumerating attack: first flip in ascending construction depth.

    The input itself is checked first (a distance-0 hit), then each
    breadth-first neighborhood layer in canonical order.  Intended for small
    k; the layer sizes grow exponentially.
    """
    started = time.perf_counter()
    base = oracles.snapshot()
    params = attack_mode_params(cfg.neighbor, cfg.k, x0, p)
    if cfg.k > 0:
        _check_enumerable(params)
    if prediction_diff(x0, p, oracles.classifier) != 0:
        return _result(
            STATUS_FOUND, p, oracles, base, started,
            vulnerable=x0, distance=0, chain=(x0,),
        )
    if cfg.k == 0:
        return _result(STATUS_NOT_FOUND, p, oracles, base, started)

    parents: dict[Sentence, Sentence] = {}
    bfs = _BreadthFirst(x0, params, oracles.fillmask, rng)
    iterations = 0
    for depth, pairs in bfs.layers(cfg.k):
        iterations = depth
        members = [s for s, _ in pairs]
        parents.update(pairs)
        diffs, _, _ = _batched_diffs(members, p, oracles.classifier)
        for member, diff in zip(members, diffs):
            if diff != 0:
                return _result(
                    STATUS_FOUND, p, oracles, base, started,
                    vulnerable=member,
                    distance=l0_distance(x0, member),
                    iterations=iterations,
                    chain=_chain_to(member, x0, parents),
                )
    return _result(STATUS_NOT_FOUND, p, oracles, base, started, iterations=iterations)


def so_beam(
    x0: Sentence,
    cfg: AttackConfig,
    synonyms: Sequence[PatchPair],
    oracles: OracleSuite,
    rng=None,
    on_iteration: Callable[[int, list[Sentence], list[float], list[Sentence]], None] | None = None,
) -> AttackResult:
    """Beam-search attack.

    Selects the patch with the largest single-word gap, then repeatedly
    expands the beam one substitution at a time.  Every candidate of an
    iteration is checked for a flip before pruning; among simultaneous flips
    the canonically smallest sentence wins.  Pruning keeps the ``beam_width``
    candidates with the smallest loss, ties broken canonically.

    ``on_iteration(i, candidates, losses, kept)`` is an inspection hook used
    by invariant tests; production callers leave it None.
    """
    started = time.perf_counter()
    base = oracles.snapshot()
    p = select_patch(x0, synonyms, oracles.classifier)
    params = attack_mode_params(cfg.neighbor, 1, x0, p)
    if prediction_diff(x0, p, oracles.classifier) != 0:
        return _result(
            STATUS_FOUND, p, oracles, base, started,
            vulnerable=x0, distance=0, chain=(x0,),
        )

    parents: dict[Sentence, Sentence] = {}
    beam: list[Sentence] = [x0]
    loss_trace: list[float] = []
    iterations = 0
    for i in range(1, cfg.k + 1):
        iterations = i
        generated: dict[Sentence, Sentence] = {}
        for member in beam:
            for neighbor in sorted(neighbor_1(member, params, oracles.fillmask).members):
                generated.setdefault(neighbor, member)
        candidates = sorted(generated)
        if not candidates:
            break
        for sentence, parent in generated.items():
            parents.setdefault(sentence, parent)
        diffs, plain, shifted = _batched_diffs(candidates, p, oracles.classifier)
        for candidate, diff in zip(candidates, diffs):
            if diff != 0:
                return _result(
                    STATUS_FOUND, p, oracles, base, started,
                    vulnerable=candidate,
                    distance=l0_distance(x0, candidate),
                    iterations=iterations,
                    chain=_chain_to(candidate, x0, parents),
                    loss_trace=tuple(loss_trace),
                )
        losses = [loss_from_probs(a, b) for a, b in zip(plain, shifted)]
        ranked = sorted(zip(losses, candidates))
        beam = [c for _, c in ranked[: cfg.beam_width]]
        loss_trace.append(ranked[0][0])
        if on_iteration is not None:
            on_iteration(i, candidates, losses, list(beam))
    return _result(
        STATUS_NOT_FOUND, p, oracles, base, started,
        iterations=iterations, loss_trace=tuple(loss_trace),
    )


def random_baseline(
    x0: Sentence,
    p: PatchPair,
    cfg: AttackConfig,
    oracles: OracleSuite,
    rng=None,
) -> AttackResult:
    """Random-walk baseline over the same candidate sets as the beam attack.

    Each trial walks a uniform number of steps in 1..k; each step substitutes
    a uniformly chosen kept candidate at a uniformly chosen non-frozen
    position (positions with no surviving candidates are skipped) and checks
    for a flip.  Stops at the first flip; otherwise reports not-found after
    ``cfg.trials`` trials.
    """
    if rng is None:
        rng = stream_rng(cfg.seed, "random-baseline")
    started = time.perf_counter()
    base = oracles.snapshot()
    params = attack_mode_params(cfg.neighbor, 1, x0, p)
    if prediction_diff(x0, p, oracles.classifier) != 0:
        return _result(
            STATUS_FOUND, p, oracles, base, started,
            vulnerable=x0, distance=0, chain=(x0,),
        )
    if cfg.k == 0:
        return _result(STATUS_NOT_FOUND, p, oracles, base, started)

    open_positions = [
        i for i in range(len(x0)) if i not in params.frozen_positions
    ]
    for trial in range(1, cfg.trials + 1):
        steps = rng.randint(1, cfg.k)
        current = x0
        chain = [x0]
        for _ in range(steps):
            per_position = [
                (i, kept_candidates(current, i, params, oracles.fillmask))
                for i in open_positions
            ]
            viable = [(i, cands) for i, cands in per_position if cands]
            if not viable:
                break
            pos, cands = viable[rng.randrange(len(viable))]
            token = cands[rng.randrange(len(cands))]
            current = current[:pos] + (token,) + current[pos + 1 :]
            chain.append(current)
            if prediction_diff(current, p, oracles.classifier) != 0:
                return _result(
                    STATUS_FOUND, p, oracles, base, started,
                    vulnerable=current,
                    distance=l0_distance(x0, current),
                    iterations=trial,
                    chain=tuple(chain),
                )
    return _result(STATUS_NOT_FOUND, p, oracles, base, started, iterations=cfg.trials)


SKIP_NO_PATCH = "no_applicable_patch"


@dataclass(frozen=True)
class ExampleOutcome:
    """One dataset example's attack outcome (or reason it was skipped)."""

    index: int
    x0: Sentence
    label: int | None
    result: AttackResult | None
    skip_reason: str | None = None

    @property
    def skipped(self) -> bool:
        return self.result is None


def run_attack_suite(
    dataset: Sequence[tuple[Sentence, int]],
    synonyms: Sequence[PatchPair],
    method: str,
    cfg: AttackConfig,
    oracle_factory: Callable[[], OracleSuite],
    workers: int = 1,
) -> list[ExampleOutcome]:
    """Attack every dataset example with the chosen method.

    ``oracle_factory`` must return a fresh memoizing OracleSuite per call;
    each example gets its own so call counts stay scheduling-independent.
    Examples with no applicable patch are skipped and recorded as such; the
    success rate reported downstream divides by attempted examples only.
    """
    if method not in ("so-enum", "so-beam", "random"):
        raise ValueError(f"unknown attack method {method!r}")

    def run_one(item: tuple[int, tuple[Sentence, int]]) -> ExampleOutcome:
        index, (x0, label) = item
        oracles = oracle_factory()
        neighbor_rng = stream_rng(cfg.seed, f"neighbor-sampling/{index}")
        try:
            if method == "so-beam":
                result = so_beam(x0, cfg, synonyms, oracles, rng=neighbor_rng)
            else:
                p = select_patch(x0, synonyms, oracles.classifier)
                if method == "so-enum":
                    result = so_enum(x0, p, cfg, oracles, rng=neighbor_rng)
                else:
                    walk_rng = stream_rng(cfg.seed, f"random-baseline/{index}")
                    result = random_baseline(x0, p, cfg, oracles, rng=walk_rng)
        except NoApplicablePatch:
            return ExampleOutcome(index, x0, label, None, SKIP_NO_PATCH)
        return ExampleOutcome(index, x0, label, result)

    items = list(enumerate(dataset))
    if workers <= 1:
        return [run_one(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_one, items))
