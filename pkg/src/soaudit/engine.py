"""Run orchestration shared by the HTTP service and the CLI.

Each ``run_*`` function takes fully resolved domain objects, executes one
audit, and returns a report dict in the standard envelope (config, examples,
aggregate, version, started_at, finished_at).  Both front ends funnel through
here, so a CLI run and a service request with the same inputs produce the
same report.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Sequence

from .attack import AttackConfig, run_attack_suite
from .bias import bias_curve, bias_estimate, filter_test_set
from .errors import ConfigError, EmptyNeighborhood
from .neighborhood import (
    DEFAULT_DELTA,
    DEFAULT_ENUM_CAP,
    DEFAULT_KAPPA,
    NeighborParams,
    neighbor_k,
)
from .oracles.base import CachingFillMask, OracleSuite
from .oracles.builtin import BigramFillMask, BigramPerplexity, fit_log_odds_classifier
from .oracles.remote import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_RETRIES,
    DEFAULT_TIMEOUT_S,
    DEFAULT_TOP_K,
    RemoteClassifier,
    RemoteFillMask,
    RemotePerplexity,
)
from .report import (
    Dataset,
    build_report,
    outcome_record,
    quality_metrics,
    validate_report,
)
from .rng import stream_rng
from .textcore import PatchPair

BUILTIN_CLASSIFIER = "builtin:linear"
BUILTIN_NGRAM = "builtin:ngram"


@dataclass(frozen=True)
class OracleEndpoints:
    """Where each oracle lives: a builtin spec or an HTTP base URL."""

    classifier: str = BUILTIN_CLASSIFIER
    fillmask: str = BUILTIN_NGRAM
    perplexity: str = BUILTIN_NGRAM
    batch_size: int = DEFAULT_BATCH_SIZE
    timeout_s: float = DEFAULT_TIMEOUT_S
    retries: int = DEFAULT_RETRIES

    def as_dict(self) -> dict:
        return {
            "classifier": self.classifier,
            "fillmask": self.fillmask,
            "perplexity": self.perplexity,
            "batch_size": self.batch_size,
            "timeout_s": self.timeout_s,
            "retries": self.retries,
        }


def _is_url(spec: str) -> bool:
    return spec.startswith("http://") or spec.startswith("https://")


def build_backends(endpoints: OracleEndpoints, dataset: Dataset, kappa: int):
    """Construct raw oracle backends from endpoint specs.

    Builtin backends are fitted deterministically on the loaded dataset: the
    linear classifier from label log-odds, the fill-mask and perplexity
    oracles from dataset bigram counts.
    """
    transport_kwargs = dict(
        batch_size=endpoints.batch_size,
        timeout_s=endpoints.timeout_s,
        retries=endpoints.retries,
    )
    if endpoints.classifier == BUILTIN_CLASSIFIER:
        classifier = fit_log_odds_classifier(dataset.examples)
    elif _is_url(endpoints.classifier):
        classifier = RemoteClassifier(endpoints.classifier, **transport_kwargs)
    else:
        raise ConfigError(f"unknown classifier spec {endpoints.classifier!r}")

    if endpoints.fillmask == BUILTIN_NGRAM:
        fillmask = BigramFillMask(dataset.sentences)
    elif _is_url(endpoints.fillmask):
        fillmask = RemoteFillMask(
            endpoints.fillmask, top_k=max(DEFAULT_TOP_K, kappa + 1), **transport_kwargs
        )
    else:
        raise ConfigError(f"unknown fillmask spec {endpoints.fillmask!r}")

    if endpoints.perplexity == BUILTIN_NGRAM:
        perplexity = BigramPerplexity(dataset.sentences)
    elif _is_url(endpoints.perplexity):
        perplexity = RemotePerplexity(endpoints.perplexity, **transport_kwargs)
    else:
        raise ConfigError(f"unknown perplexity spec {endpoints.perplexity!r}")

    return classifier, fillmask, perplexity


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class RunSettings:
    """Every engine knob, echoed verbatim into report configs."""

    k: int = 2
    beam_width: int = 20
    kappa: int = DEFAULT_KAPPA
    delta: float = DEFAULT_DELTA
    epsilon: float = 0.005
    sample_budget: int | None = None
    enum_cap: int = DEFAULT_ENUM_CAP
    trials: int = 50
    seed: int = 0
    workers: int = 1
    blacklist: frozenset[str] = frozenset()

    def neighbor_params(self) -> NeighborParams:
        return NeighborParams(
            k=max(self.k, 0),
            kappa=self.kappa,
            delta=self.delta,
            token_blacklist=self.blacklist,
            sample_budget=self.sample_budget,
            enum_cap=self.enum_cap,
        )

    def config_echo(self, command: str, endpoints: OracleEndpoints, provenance: dict) -> dict:
        return {
            "command": command,
            **provenance,
            "k": self.k,
            "beam_width": self.beam_width,
            "kappa": self.kappa,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "sample_budget": self.sample_budget,
            "enum_cap": self.enum_cap,
            "trials": self.trials,
            "seed": self.seed,
            "workers": self.workers,
            "blacklist": sorted(self.blacklist),
            "oracles": endpoints.as_dict(),
        }


def run_attack(
    dataset: Dataset,
    synonyms: Sequence[PatchPair],
    method: str,
    settings: RunSettings,
    endpoints: OracleEndpoints,
    provenance: dict | None = None,
) -> dict:
    """Attack every dataset example and assemble the run report."""
    started = _now()
    classifier, fillmask, perplexity = build_backends(endpoints, dataset, settings.kappa)
    cfg = AttackConfig(
        k=settings.k,
        beam_width=settings.beam_width,
        neighbor=settings.neighbor_params(),
        trials=settings.trials,
        seed=settings.seed,
    )
    outcomes = run_attack_suite(
        dataset.examples,
        synonyms,
        method,
        cfg,
        oracle_factory=lambda: OracleSuite.wrap(classifier, fillmask, perplexity),
        workers=settings.workers,
    )
    metrics = quality_metrics(outcomes, perplexity)
    config = settings.config_echo("attack", endpoints, provenance or {})
    config["method"] = method
    return build_report(
        config=config,
        examples=[outcome_record(o) for o in outcomes],
        aggregate=metrics.as_dict(),
        started_at=started,
        finished_at=_now(),
    )


def _estimate_record(index: int, estimate) -> dict:
    return {
        "index": index,
        "patch": [estimate.pair.p1, estimate.pair.p2],
        "k": estimate.k,
        "status": "ok",
        "mean": estimate.mean,
        "sample_count": estimate.sample_count,
        "stderr": estimate.stderr,
        "exact": estimate.exact,
        "truncated": estimate.truncated,
        "skipped_examples": estimate.skipped_examples,
        "histogram": list(estimate.histogram),
        "skip_reason": None,
    }


def _skipped_pair_record(index: int, pair: PatchPair, k, reason: str) -> dict:
    return {
        "index": index,
        "patch": [pair.p1, pair.p2],
        "k": k,
        "status": "skipped",
        "mean": None,
        "sample_count": 0,
        "stderr": None,
        "exact": None,
        "truncated": False,
        "skipped_examples": None,
        "histogram": None,
        "skip_reason": reason,
    }


def run_bias_estimate(
    dataset: Dataset,
    pairs: Sequence[PatchPair],
    settings: RunSettings,
    endpoints: OracleEndpoints,
    provenance: dict | None = None,
    curve: bool = False,
) -> dict:
    """Per-pair bias estimates at distance k (or the whole 0..k curve)."""
    started = _now()
    classifier, fillmask, _ = build_backends(endpoints, dataset, settings.kappa)
    params = settings.neighbor_params()
    sentences = dataset.sentences
    examples: list[dict] = []
    estimated = skipped = 0
    index = 0
    for pair in pairs:
        oracles = OracleSuite.wrap(classifier, fillmask)
        try:
            if curve:
                estimates = bias_curve(
                    sentences, pair, settings.k, params, oracles, seed=settings.seed
                )
            else:
                rng = stream_rng(settings.seed, f"bias-sampling/{pair.p1}->{pair.p2}")
                estimates = [
                    bias_estimate(
                        sentences, pair, settings.k, params, oracles,
                        seed=settings.seed, rng=rng,
                    )
                ]
        except EmptyNeighborhood as exc:
            examples.append(_skipped_pair_record(index, pair, settings.k, str(exc)))
            index += 1
            skipped += 1
            continue
        for estimate in estimates:
            examples.append(_estimate_record(index, estimate))
            index += 1
        estimated += 1
    config = settings.config_echo(
        "bias-curve" if curve else "bias-estimate", endpoints, provenance or {}
    )
    aggregate = {
        "pairs_total": len(pairs),
        "pairs_estimated": estimated,
        "pairs_skipped": skipped,
        "mean_wall_time_s": None,
    }
    return build_report(config, examples, aggregate, started, _now())


def run_bias_filter(
    dataset: Dataset,
    pairs: Sequence[PatchPair],
    settings: RunSettings,
    endpoints: OracleEndpoints,
    provenance: dict | None = None,
) -> dict:
    """Filtered test set per pair: sentences whose direct shift is below epsilon."""
    started = _now()
    classifier, fillmask, _ = build_backends(endpoints, dataset, settings.kappa)
    examples = []
    total_kept = 0
    for index, pair in enumerate(pairs):
        oracles = OracleSuite.wrap(classifier, fillmask)
        filtered = filter_test_set(dataset.sentences, pair, settings.epsilon, oracles.classifier)
        total_kept += len(filtered.members)
        examples.append(
            {
                "index": index,
                "patch": [pair.p1, pair.p2],
                "epsilon": settings.epsilon,
                "status": "ok",
                "kept_count": len(filtered.members),
                "scanned": len(dataset.sentences),
                "kept": [list(x) for x in filtered.members],
            }
        )
    config = settings.config_echo("bias-filter", endpoints, provenance or {})
    aggregate = {
        "pairs_total": len(pairs),
        "kept_total": total_kept,
        "mean_wall_time_s": None,
    }
    return build_report(config, examples, aggregate, started, _now())


def run_neighbors(
    dataset: Dataset,
    settings: RunSettings,
    endpoints: OracleEndpoints,
    provenance: dict | None = None,
) -> dict:
    """Dump each example's neighborhood for inspection."""
    started = _now()
    _, fillmask, _ = build_backends(endpoints, dataset, settings.kappa)
    params = settings.neighbor_params()
    cached_fillmask = CachingFillMask(fillmask)
    examples = []
    total = 0
    for index, (x0, _) in enumerate(dataset.examples):
        rng = stream_rng(settings.seed, f"neighbor-sampling/{index}")
        members = neighbor_k(x0, params, cached_fillmask, rng)
        ordered = sorted(members.members)
        total += len(ordered)
        examples.append(
            {
                "index": index,
                "input_tokens": list(x0),
                "k": settings.k,
                "member_count": len(ordered),
                "truncated": members.truncated,
                "members": [list(m) for m in ordered],
            }
        )
    config = settings.config_echo("neighbors", endpoints, provenance or {})
    aggregate = {"member_total": total, "mean_wall_time_s": None}
    return build_report(config, examples, aggregate, started, _now())


def run_validate(
    report: dict,
    dataset: Dataset,
    endpoints: OracleEndpoints,
) -> dict:
    """Re-check a previously produced report's found results against the oracles."""
    config = report.get("config", {})
    settings = RunSettings(
        k=config.get("k", 2),
        kappa=config.get("kappa", DEFAULT_KAPPA),
        delta=config.get("delta", DEFAULT_DELTA),
        sample_budget=config.get("sample_budget"),
        enum_cap=config.get("enum_cap", DEFAULT_ENUM_CAP),
        blacklist=frozenset(config.get("blacklist", [])),
    )
    classifier, fillmask, _ = build_backends(endpoints, dataset, settings.kappa)
    oracles = OracleSuite.wrap(classifier, fillmask)
    failures = validate_report(report, oracles, settings.neighbor_params())
    checked = sum(1 for r in report.get("examples", []) if r.get("status") == "found")
    return {"ok": not failures, "checked": checked, "failures": failures}
