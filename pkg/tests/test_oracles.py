"""Builtin oracle backends, memo caches, and the HTTP transport."""

import math
import threading
import time

import httpx
import pytest
import uvicorn
from fastapi import FastAPI
from fastapi.responses import JSONResponse, PlainTextResponse

from soaudit.errors import OracleUnavailable, ProtocolError
from soaudit.oracles.base import (
    CachingClassifier,
    CachingFillMask,
    MaskCandidates,
    predict_hard,
)
from soaudit.oracles.builtin import (
    BigramFillMask,
    BigramPerplexity,
    LinearClassifier,
    fit_log_odds_classifier,
    logistic,
)
from soaudit.oracles.remote import RemoteClassifier, RemoteFillMask, RemotePerplexity
from soaudit.service import create_oracle_app
from support import FakeClassifier


class TestDecisionRule:
    def test_positive(self):
        assert predict_hard(FakeClassifier(default=0.73), ("x",)) == 1

    def test_tie_maps_to_one(self):
        assert predict_hard(FakeClassifier(default=0.5), ("x",)) == 1

    def test_negative(self):
        assert predict_hard(FakeClassifier(default=0.30), ("x",)) == 0


class TestLinearClassifier:
    def test_single_weight(self):
        clf = LinearClassifier({"good": 2.0})
        expected = 1.0 / (1.0 + math.exp(-2.0))  # direct evaluation
        assert clf.predict_soft([("good",)]) == [pytest.approx(expected, abs=1e-12)]
        assert expected == pytest.approx(0.8808, abs=1e-4)

    def test_empty_weights_give_half(self):
        assert LinearClassifier({}).predict_soft([("any", "thing")]) == [0.5]

    def test_cancellation(self):
        clf = LinearClassifier({"good": 2.0, "bad": -2.0})
        assert clf.predict_soft([("good", "bad")]) == [0.5]

    def test_patch_shift_depends_only_on_weight_gap(self):
        # moving p1 -> p2 shifts the logit by w[p2] - w[p1] regardless of slot
        w = {"p": 1.0, "q": 2.5, "z": -0.3}
        clf = LinearClassifier(w)
        for rest in [("z",), ("z", "z"), ()]:
            x = rest + ("p",)
            y = rest + ("q",)
            base = sum(w.get(t, 0.0) for t in rest)
            got = clf.predict_soft([x, y])
            assert got[0] == pytest.approx(logistic(base + w["p"]), abs=1e-15)
            assert got[1] == pytest.approx(logistic(base + w["q"]), abs=1e-15)


def test_fit_log_odds_separates_classes():
    examples = [
        (("good", "film"), 1),
        (("good", "fun"), 1),
        (("bad", "film"), 0),
        (("bad", "dull"), 0),
    ]
    clf = fit_log_odds_classifier(examples)
    probs = clf.predict_soft([("good",), ("bad",)])
    assert probs[0] > 0.5 > probs[1]
    assert clf.predict_soft([("good",), ("bad",)]) == probs  # deterministic


class TestBigramFillMask:
    def test_bridges_context(self):
        # corpus [a b c]: masking the middle of (a ? c) must propose b with
        # score log1p(2): one (a, b) bigram plus one (b, c) bigram
        lm = BigramFillMask([("a", "b", "c")])
        cands = lm.fill(("a", "x", "c"), 1)
        assert cands.tokens == ("b",)
        assert cands.logits == (math.log1p(2),)

    def test_unigram_fallback_for_single_token(self):
        lm = BigramFillMask([("a", "b"), ("b", "c")])
        cands = lm.fill(("z",), 0)
        # b appears twice, a and c once; ties break lexicographically
        assert cands.tokens == ("b", "a", "c")
        assert cands.logits == (math.log1p(2), math.log1p(1), math.log1p(1))

    def test_unseen_token_excluded(self):
        lm = BigramFillMask([("a", "b", "c")])
        assert "x" not in lm.fill(("a", "x", "c"), 1).tokens

    def test_boundary_positions_use_one_side(self):
        lm = BigramFillMask([("a", "b"), ("c", "b")])
        start = lm.fill(("z", "b"), 0)  # only left-of-b counts
        assert set(start.tokens) == {"a", "c"}

    def test_logits_nonincreasing(self):
        lm = BigramFillMask([("a", "b"), ("a", "c"), ("a", "b")])
        cands = lm.fill(("a", "z"), 1)
        assert list(cands.logits) == sorted(cands.logits, reverse=True)


class TestBigramPerplexity:
    def test_positive_and_deterministic(self):
        ppl = BigramPerplexity([("a", "b"), ("a", "b")])
        value = ppl.ppl(("a", "b"))
        assert value > 0
        assert ppl.ppl(("a", "b")) == value

    def test_fluent_below_scrambled(self):
        corpus = [("the", "film", "is", "good")] * 3
        ppl = BigramPerplexity(corpus)
        assert ppl.ppl(("the", "film", "is", "good")) < ppl.ppl(("good", "the", "is", "film"))

    def test_unknown_tokens_still_scored(self):
        ppl = BigramPerplexity([("a", "b")])
        assert ppl.ppl(("zz", "qq")) > 0


class _CountingBackend:
    def __init__(self):
        self.calls = []

    def predict_soft(self, batch):
        self.calls.append(list(batch))
        return [0.7] * len(batch)


class TestCachingClassifier:
    def test_counts_and_dedup(self):
        backend = _CountingBackend()
        cache = CachingClassifier(backend)
        out = cache.predict_soft([("a",), ("b",), ("a",)])
        assert out == [0.7, 0.7, 0.7]
        stats = cache.stats()
        assert stats.requests == 3
        assert stats.cache_hits == 0  # duplicates inside one batch are deduped, not hits
        assert stats.backend_calls == 2

        cache.predict_soft([("a",)])
        stats = cache.stats()
        assert (stats.requests, stats.cache_hits, stats.backend_calls) == (4, 1, 2)
        assert len(backend.calls) == 1

    def test_empty_batch(self):
        cache = CachingClassifier(_CountingBackend())
        assert cache.predict_soft([]) == []
        assert cache.stats().requests == 0


def test_caching_fillmask_counts():
    lm = BigramFillMask([("a", "b", "c")])
    cache = CachingFillMask(lm)
    first = cache.fill(("a", "x", "c"), 1)
    second = cache.fill(("a", "x", "c"), 1)
    assert first == second
    stats = cache.stats()
    assert (stats.requests, stats.cache_hits, stats.backend_calls) == (2, 1, 1)


def test_mask_candidates_contract():
    with pytest.raises(ValueError):
        MaskCandidates(tokens=("a",), logits=(1.0, 2.0))
    with pytest.raises(ValueError):
        MaskCandidates(tokens=("a", "b"), logits=(1.0, 2.0))


# ---------------------------------------------------------------------------
# Remote transport against a live reference server.
# ---------------------------------------------------------------------------


class AppServer:
    """Run an ASGI app on an ephemeral port in a background thread."""

    def __init__(self, app):
        self._server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def __enter__(self) -> str:
        self._thread.start()
        deadline = time.time() + 10
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def __exit__(self, *exc):
        self._server.should_exit = True
        self._thread.join(timeout=10)


@pytest.fixture(scope="module")
def reference_server():
    corpus = [
        ("a", "deep", "and", "meaningful", "film", "."),
        ("a", "short", "and", "moving", "film", "."),
        ("a", "deep", "and", "moving", "story", "."),
    ]
    classifier = LinearClassifier({"deep": 1.2, "moving": 0.8, "short": -0.5}, bias=0.1)
    fillmask = BigramFillMask(corpus)
    perplexity = BigramPerplexity(corpus)
    app = create_oracle_app(classifier, fillmask, perplexity)
    with AppServer(app) as url:
        yield url, classifier, fillmask, perplexity


class TestRemoteOracles:
    def test_predict_conformance(self, reference_server):
        url, classifier, _, _ = reference_server
        remote = RemoteClassifier(url, batch_size=2)
        batch = [
            ("a", "deep", "and", "meaningful", "film", "."),
            ("a", "short", "and", "moving", "film", "."),
            ("unseen", "words"),
        ]
        local = classifier.predict_soft(batch)
        over_http = remote.predict_soft(batch)
        assert over_http == pytest.approx(local, abs=1e-5)

    def test_empty_batch_short_circuits(self, reference_server):
        url, _, _, _ = reference_server
        assert RemoteClassifier(url).predict_soft([]) == []

    def test_fillmask_conformance(self, reference_server):
        url, _, fillmask, _ = reference_server
        remote = RemoteFillMask(url, top_k=3)
        x = ("a", "deep", "and", "meaningful", "film", ".")
        got = remote.fill(x, 1)
        local = fillmask.fill(x, 1)
        assert got.tokens == local.tokens[:3]
        assert got.logits == pytest.approx(local.logits[:3], abs=1e-9)

    def test_perplexity_conformance(self, reference_server):
        url, _, _, perplexity = reference_server
        remote = RemotePerplexity(url)
        x = ("a", "deep", "and", "moving", "story", ".")
        assert remote.ppl(x) == pytest.approx(perplexity.ppl(x), rel=1e-9)

    def test_server_rejects_malformed_input(self, reference_server):
        url, _, _, _ = reference_server
        resp = httpx.post(f"{url}/v1/predict", json={"texts": "not-a-list"})
        assert resp.status_code == 400
        assert "error" in resp.json()


def _misbehaving_app():
    app = FastAPI()

    @app.post("/v1/predict")
    def predict(body: dict):
        return PlainTextResponse("not json")

    @app.post("/v1/fillmask")
    def fill(body: dict):
        return {"tokens": ["a"], "logits": [1.0, 2.0]}

    @app.post("/v1/perplexity")
    def ppl(body: dict):
        return JSONResponse(status_code=503, content={"error": "model loading"})

    return app


@pytest.fixture(scope="module")
def misbehaving_server():
    with AppServer(_misbehaving_app()) as url:
        yield url


class TestRemoteFailureModes:
    def test_non_json_response(self, misbehaving_server):
        with pytest.raises(ProtocolError):
            RemoteClassifier(misbehaving_server, retries=0).predict_soft([("a",)])

    def test_mismatched_arrays(self, misbehaving_server):
        with pytest.raises(ProtocolError):
            RemoteFillMask(misbehaving_server, retries=0).fill(("a", "b"), 0)

    def test_unavailable_after_retries(self, misbehaving_server):
        with pytest.raises(OracleUnavailable):
            RemotePerplexity(misbehaving_server, retries=1).ppl(("a",))

    def test_unreachable_endpoint(self):
        with pytest.raises(OracleUnavailable):
            RemoteClassifier(
                "http://127.0.0.1:9", retries=0, timeout_s=0.2
            ).predict_soft([("a",)])
