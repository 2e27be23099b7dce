"""Oracle interfaces, the decision rule, and memoizing call-counting wrappers.

All oracles are black boxes: the engine only ever sees probabilities, mask
candidates, and perplexities.  Implementations must be deterministic (same
query, same answer) or the search results stop being reproducible.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

from ..textcore import Sentence

# Soft probability at or above this maps to hard label 1.  Ties go to 1 so the
# decision is total and deterministic.
DECISION_THRESHOLD = 0.5


@dataclass(frozen=True)
class MaskCandidates:
    """Replacement candidates for one masked position, best first.

    ``logits`` must be nonincreasing and aligned index-for-index with
    ``tokens``.
    """

    tokens: tuple[str, ...]
    logits: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.logits):
            raise ValueError("tokens and logits must have equal length")
        for a, b in zip(self.logits, self.logits[1:]):
            if b > a:
                raise ValueError("logits must be sorted nonincreasing")

    def __len__(self) -> int:
        return len(self.tokens)


@runtime_checkable
class ClassifierOracle(Protocol):
    def predict_soft(self, batch: Sequence[Sentence]) -> list[float]:
        """Positive-class probability for each sentence, same order."""
        ...


@runtime_checkable
class FillMaskOracle(Protocol):
    def fill(self, x: Sentence, index: int) -> MaskCandidates:
        """Candidates for ``x`` with position ``index`` masked."""
        ...


@runtime_checkable
class PerplexityOracle(Protocol):
    def ppl(self, x: Sentence) -> float:
        """Language-model perplexity of ``x``; lower is more natural."""
        ...


def hard_label(prob: float) -> int:
    return 1 if prob >= DECISION_THRESHOLD else 0


def predict_hard(oracle: ClassifierOracle, x: Sentence) -> int:
    """Binary decision for a single sentence."""
    return hard_label(oracle.predict_soft([x])[0])


@dataclass(frozen=True)
class CallStats:
    """Oracle traffic counters.

    ``requests`` counts every query the engine issued, ``cache_hits`` the ones
    answered from the memo cache, ``backend_calls`` the distinct queries that
    actually reached the underlying model.
    """

    requests: int = 0
    cache_hits: int = 0
    backend_calls: int = 0

    def delta(self, earlier: "CallStats") -> "CallStats":
        return CallStats(
            requests=self.requests - earlier.requests,
            cache_hits=self.cache_hits - earlier.cache_hits,
            backend_calls=self.backend_calls - earlier.backend_calls,
        )

    def add(self, other: "CallStats") -> "CallStats":
        return CallStats(
            requests=self.requests + other.requests,
            cache_hits=self.cache_hits + other.cache_hits,
            backend_calls=self.backend_calls + other.backend_calls,
        )

    def as_dict(self) -> dict:
        return {
            "requests": self.requests,
            "cache_hits": self.cache_hits,
            "backend_calls": self.backend_calls,
        }


class CachingClassifier:
    """Memoizing wrapper around a classifier backend.

    The second-order searches re-score heavily overlapping neighborhoods, so
    every classifier query goes through this cache.  Thread-safe; the backend
    is called while holding the lock, which serializes backend traffic through
    one dispatch queue.
    """

    def __init__(self, inner: ClassifierOracle):
        self._inner = inner
        self._cache: dict[Sentence, float] = {}
        self._lock = threading.Lock()
        self._requests = 0
        self._hits = 0
        self._backend = 0

    def predict_soft(self, batch: Sequence[Sentence]) -> list[float]:
        batch = list(batch)
        if not batch:
            return []
        with self._lock:
            self._requests += len(batch)
            missing: dict[Sentence, None] = {}
            for x in batch:
                if x in self._cache:
                    self._hits += 1
                elif x not in missing:
                    missing[x] = None
            if missing:
                xs = list(missing)
                probs = self._inner.predict_soft(xs)
                if len(probs) != len(xs):
                    raise ValueError("classifier backend returned wrong batch size")
                self._cache.update(zip(xs, probs))
                self._backend += len(xs)
            return [self._cache[x] for x in batch]

    def stats(self) -> CallStats:
        with self._lock:
            return CallStats(self._requests, self._hits, self._backend)


class CachingFillMask:
    """Memoizing wrapper around a fill-mask backend, keyed by (sentence, index)."""

    def __init__(self, inner: FillMaskOracle):
        self._inner = inner
        self._cache: dict[tuple[Sentence, int], MaskCandidates] = {}
        self._lock = threading.Lock()
        self._requests = 0
        self._hits = 0
        self._backend = 0

    def fill(self, x: Sentence, index: int) -> MaskCandidates:
        key = (x, index)
        with self._lock:
            self._requests += 1
            cached = self._cache.get(key)
            if cached is not None:
                self._hits += 1
                return cached
            result = self._inner.fill(x, index)
            self._cache[key] = result
            self._backend += 1
            return result

    def stats(self) -> CallStats:
        with self._lock:
            return CallStats(self._requests, self._hits, self._backend)


@dataclass
class OracleSuite:
    """The oracle bundle one attack or bias run works against."""

    classifier: CachingClassifier
    fillmask: CachingFillMask
    perplexity: PerplexityOracle | None = None

    @classmethod
    def wrap(
        cls,
        classifier: ClassifierOracle,
        fillmask: FillMaskOracle,
        perplexity: PerplexityOracle | None = None,
    ) -> "OracleSuite":
        """Wrap raw backends in fresh memo caches.

        Each audited example gets its own wrapper so per-example call counts
        do not depend on worker scheduling.
        """
        return cls(CachingClassifier(classifier), CachingFillMask(fillmask), perplexity)

    def snapshot(self) -> tuple[CallStats, CallStats]:
        return self.classifier.stats(), self.fillmask.stats()
