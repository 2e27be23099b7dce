"""FastAPI apps: the audit service and a reference oracle-protocol server.

``create_audit_app`` wraps the engine: clients post datasets and settings,
the service answers with the standard report envelope.  ``create_oracle_app``
serves a fixed oracle triple over the oracle wire protocol; it exists so the
remote transport can be tested end to end and as a dev stand-in for a real
model server.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__
from . import engine
from .errors import AuditError, EmptyInput, OracleUnavailable
from .oracles.base import ClassifierOracle, FillMaskOracle, PerplexityOracle
from .report import Dataset
from .schemas import (
    AttackRequest,
    BiasRequest,
    ExampleIn,
    HealthOut,
    NeighborsRequest,
    OracleEndpointsIn,
    RunReportOut,
    SettingsIn,
    ValidateOut,
    ValidateRequest,
)
from .textcore import PatchPair, tokenize

INLINE_SOURCE = "<inline>"


def _dataset(examples: list[ExampleIn]) -> Dataset:
    parsed = tuple((tokenize(e.text), e.label) for e in examples)
    return Dataset(examples=parsed, source=INLINE_SOURCE, split=INLINE_SOURCE)


def _settings(s: SettingsIn) -> engine.RunSettings:
    return engine.RunSettings(
        k=s.k,
        beam_width=s.beam_width,
        kappa=s.kappa,
        delta=s.delta,
        epsilon=s.epsilon,
        sample_budget=s.sample_budget,
        enum_cap=s.enum_cap,
        trials=s.trials,
        seed=s.seed,
        workers=s.workers,
        blacklist=frozenset(t.lower() for t in s.blacklist),
    )


def _endpoints(o: OracleEndpointsIn) -> engine.OracleEndpoints:
    return engine.OracleEndpoints(
        classifier=o.classifier,
        fillmask=o.fillmask,
        perplexity=o.perplexity,
        batch_size=o.batch_size,
        timeout_s=o.timeout_s,
        retries=o.retries,
    )


def _provenance() -> dict:
    return {"dataset_path": INLINE_SOURCE, "split": INLINE_SOURCE}


def create_audit_app() -> FastAPI:
    app = FastAPI(title="soaudit", version=__version__)

    @app.exception_handler(AuditError)
    async def _audit_error(_: Request, exc: AuditError) -> JSONResponse:
        status = 503 if isinstance(exc, OracleUnavailable) else 400
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.get("/health", response_model=HealthOut)
    def health() -> HealthOut:
        return HealthOut(status="ok", version=__version__)

    @app.post("/v1/attack", response_model=RunReportOut)
    def attack(req: AttackRequest) -> dict:
        return engine.run_attack(
            _dataset(req.dataset),
            [PatchPair(a.lower(), b.lower()) for a, b in req.synonyms],
            req.method,
            _settings(req.settings),
            _endpoints(req.oracles),
            provenance=_provenance(),
        )

    @app.post("/v1/bias/estimate", response_model=RunReportOut)
    def bias_estimate(req: BiasRequest) -> dict:
        return engine.run_bias_estimate(
            _dataset(req.dataset),
            [PatchPair(a.lower(), b.lower()) for a, b in req.pairs],
            _settings(req.settings),
            _endpoints(req.oracles),
            provenance=_provenance(),
        )

    @app.post("/v1/bias/curve", response_model=RunReportOut)
    def bias_curve(req: BiasRequest) -> dict:
        return engine.run_bias_estimate(
            _dataset(req.dataset),
            [PatchPair(a.lower(), b.lower()) for a, b in req.pairs],
            _settings(req.settings),
            _endpoints(req.oracles),
            provenance=_provenance(),
            curve=True,
        )

    @app.post("/v1/bias/filter", response_model=RunReportOut)
    def bias_filter(req: BiasRequest) -> dict:
        return engine.run_bias_filter(
            _dataset(req.dataset),
            [PatchPair(a.lower(), b.lower()) for a, b in req.pairs],
            _settings(req.settings),
            _endpoints(req.oracles),
            provenance=_provenance(),
        )

    @app.post("/v1/neighbors", response_model=RunReportOut)
    def neighbors(req: NeighborsRequest) -> dict:
        return engine.run_neighbors(
            _dataset(req.dataset),
            _settings(req.settings),
            _endpoints(req.oracles),
            provenance=_provenance(),
        )

    @app.post("/v1/validate", response_model=ValidateOut)
    def validate(req: ValidateRequest) -> dict:
        endpoints = _endpoints(req.oracles) if req.oracles else engine.OracleEndpoints(
            **{
                k: v
                for k, v in req.report.get("config", {}).get("oracles", {}).items()
                if k in engine.OracleEndpoints.__dataclass_fields__
            }
        )
        return engine.run_validate(req.report, _dataset(req.dataset), endpoints)

    return app


def create_oracle_app(
    classifier: ClassifierOracle,
    fillmask: FillMaskOracle,
    perplexity: PerplexityOracle,
) -> FastAPI:
    """Serve one oracle triple over the oracle wire protocol.

    Contract: malformed input answers 400 with {"error": ...}; an unavailable
    backend answers 503.
    """
    app = FastAPI(title="soaudit-oracles", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def _validation(_: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:1])})

    @app.exception_handler(AuditError)
    async def _audit_error(_: Request, exc: AuditError) -> JSONResponse:
        status = 503 if isinstance(exc, OracleUnavailable) else 400
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.get("/health", response_model=HealthOut)
    def health() -> HealthOut:
        return HealthOut(status="ok", version=__version__)

    @app.post("/v1/predict")
    def predict(body: dict) -> dict:
        texts = body.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            raise EmptyInput("'texts' must be a list of strings")
        sentences = [tokenize(t) for t in texts]
        return {"probs": classifier.predict_soft(sentences)}

    @app.post("/v1/fillmask")
    def fill(body: dict) -> dict:
        tokens = body.get("tokens")
        index = body.get("index")
        top_k = body.get("top_k", 64)
        if (
            not isinstance(tokens, list)
            or not all(isinstance(t, str) for t in tokens)
            or not tokens
            or not isinstance(index, int)
            or isinstance(index, bool)
            or not 0 <= index < len(tokens)
            or not isinstance(top_k, int)
            or top_k < 1
        ):
            raise EmptyInput("need 'tokens' (nonempty strings), valid 'index', positive 'top_k'")
        cands = fillmask.fill(tuple(tokens), index)
        return {
            "tokens": list(cands.tokens[:top_k]),
            "logits": list(cands.logits[:top_k]),
        }

    @app.post("/v1/perplexity")
    def ppl(body: dict) -> dict:
        texts = body.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            raise EmptyInput("'texts' must be a list of strings")
        return {"ppls": [perplexity.ppl(tokenize(t)) for t in texts]}

    return app
