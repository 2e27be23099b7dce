"""HTTP-backed oracles speaking the JSON oracle protocol.

Protocol (all POST, JSON bodies, UTF-8):
    /v1/predict     {"texts": [...]}                      -> {"probs": [...]}
    /v1/fillmask    {"tokens": [...], "index": i,
                     "top_k": n}                          -> {"tokens": [...], "logits": [...]}
    /v1/perplexity  {"texts": [...]}                      -> {"ppls": [...]}

Transient failures (connection errors, 5xx) are retried; anything structurally
wrong in a response raises ProtocolError immediately.  Requests are
idempotent, so retries are safe.
"""

from __future__ import annotations

from typing import Sequence

import httpx

from ..errors import OracleUnavailable, ProtocolError
from ..textcore import Sentence, detokenize
from .base import MaskCandidates

DEFAULT_BATCH_SIZE = 64
DEFAULT_TIMEOUT_S = 30.0
DEFAULT_RETRIES = 2
DEFAULT_TOP_K = 64


class _RemoteBase:
    def __init__(
        self,
        endpoint: str,
        *,
        batch_size: int = DEFAULT_BATCH_SIZE,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        retries: int = DEFAULT_RETRIES,
        transport: httpx.BaseTransport | None = None,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self._batch_size = batch_size
        self._retries = retries
        self._client = httpx.Client(
            base_url=endpoint.rstrip("/"), timeout=timeout_s, transport=transport
        )

    def _post(self, path: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for _ in range(self._retries + 1):
            try:
                resp = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                # 503 model unavailable and friends: transient, retry
                last_error = OracleUnavailable(
                    f"{path} returned {resp.status_code}: {resp.text[:200]}"
                )
                continue
            if resp.status_code != 200:
                raise ProtocolError(
                    f"{path} returned {resp.status_code}: {resp.text[:200]}"
                )
            try:
                body = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{path} returned non-JSON body") from exc
            if not isinstance(body, dict):
                raise ProtocolError(f"{path} returned non-object JSON")
            return body
        raise OracleUnavailable(f"{path} unreachable after {self._retries + 1} attempts: {last_error}")

    @staticmethod
    def _float_list(body: dict, key: str, expected_len: int, path: str) -> list[float]:
        values = body.get(key)
        if not isinstance(values, list) or len(values) != expected_len:
            raise ProtocolError(f"{path}: expected {expected_len} values under {key!r}")
        out = []
        for v in values:
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ProtocolError(f"{path}: non-numeric value under {key!r}")
            out.append(float(v))
        return out

    def close(self) -> None:
        self._client.close()


class RemoteClassifier(_RemoteBase):
    """ClassifierOracle over /v1/predict; batches requests up to batch_size."""

    def predict_soft(self, batch: Sequence[Sentence]) -> list[float]:
        batch = list(batch)
        probs: list[float] = []
        for start in range(0, len(batch), self._batch_size):
            chunk = batch[start : start + self._batch_size]
            body = self._post("/v1/predict", {"texts": [detokenize(x) for x in chunk]})
            values = self._float_list(body, "probs", len(chunk), "/v1/predict")
            for v in values:
                if not 0.0 <= v <= 1.0:
                    raise ProtocolError(f"/v1/predict: probability {v} outside [0, 1]")
            probs.extend(values)
        return probs


class RemoteFillMask(_RemoteBase):
    """FillMaskOracle over /v1/fillmask.

    ``top_k`` must comfortably exceed the neighborhood kappa so the logit
    threshold sees the (kappa+1)-th candidate.
    """

    def __init__(self, endpoint: str, *, top_k: int = DEFAULT_TOP_K, **kwargs):
        super().__init__(endpoint, **kwargs)
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        self._top_k = top_k

    def fill(self, x: Sentence, index: int) -> MaskCandidates:
        body = self._post(
            "/v1/fillmask",
            {"tokens": list(x), "index": index, "top_k": self._top_k},
        )
        tokens = body.get("tokens")
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise ProtocolError("/v1/fillmask: malformed tokens array")
        logits = self._float_list(body, "logits", len(tokens), "/v1/fillmask")
        try:
            return MaskCandidates(tokens=tuple(tokens), logits=tuple(logits))
        except ValueError as exc:
            raise ProtocolError(f"/v1/fillmask: {exc}") from exc


class RemotePerplexity(_RemoteBase):
    """PerplexityOracle over /v1/perplexity."""

    def ppl(self, x: Sentence) -> float:
        body = self._post("/v1/perplexity", {"texts": [detokenize(x)]})
        value = self._float_list(body, "ppls", 1, "/v1/perplexity")[0]
        if value <= 0:
            raise ProtocolError(f"/v1/perplexity: nonpositive perplexity {value}")
        return value
