"""Command-line client for the audit engine.

Every subcommand builds the same request the HTTP service accepts.  By
default it executes in process; with ``--server`` it posts to a running
audit service instead and just writes the returned report.  Exit codes:
0 report written, 1 runtime failure, 2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from . import __version__, engine
from .errors import AuditError, ConfigError
from .report import (
    Dataset,
    load_blacklist,
    load_dataset,
    load_pairs,
    write_report_csv,
    write_report_json,
)

SERVER_TIMEOUT_S = 600.0


def _add_oracle_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--classifier", default="builtin:linear",
                        help="classifier oracle: builtin:linear or an http(s) URL")
    parser.add_argument("--fillmask", default="builtin:ngram",
                        help="fill-mask oracle: builtin:ngram or an http(s) URL")
    parser.add_argument("--ppl", default="builtin:ngram",
                        help="perplexity oracle: builtin:ngram or an http(s) URL")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--timeout", type=float, default=30.0,
                        help="per-request oracle timeout in seconds")
    parser.add_argument("--retries", type=int, default=2)


def _add_search_flags(parser: argparse.ArgumentParser, default_k: int = 2) -> None:
    parser.add_argument("--k", type=int, default=default_k,
                        help="max substitution distance (k_max for bias curve)")
    parser.add_argument("--kappa", type=int, default=20,
                        help="top candidates kept per masked position")
    parser.add_argument("--delta", type=float, default=3.0,
                        help="logit margin below the best candidate")
    parser.add_argument("--sample-budget", type=int, default=None,
                        help="per-level / per-example sampling budget for large k")
    parser.add_argument("--enum-cap", type=int, default=3,
                        help="full enumeration allowed only below this k")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--blacklist", default=None,
                        help="file with one excluded candidate token per line")


def _add_io_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None, help="report path (stdout when omitted)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--server", default=None,
                        help="base URL of a running audit service; run there instead of in-process")
    parser.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="soaudit",
        description="Audit a black-box text classifier for second-order "
                    "robustness and counterfactual token bias.",
    )
    parser.add_argument("--version", action="version", version=f"soaudit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    attack = sub.add_parser("attack", help="search for vulnerable examples")
    attack.add_argument("--dataset", required=True)
    attack.add_argument("--synonyms", "--pairs", dest="pairs", required=True,
                        help="TSV file of synonym pairs, one 'p1<TAB>p2' per line")
    attack.add_argument("--method", choices=("so-enum", "so-beam", "random"), required=True)
    attack.add_argument("--beam", type=int, default=20, help="beam width")
    attack.add_argument("--trials", type=int, default=50,
                        help="trials for the random baseline")
    _add_search_flags(attack)
    _add_oracle_flags(attack)
    _add_io_flags(attack)

    bias = sub.add_parser("bias", help="estimate counterfactual token bias")
    bias_sub = bias.add_subparsers(dest="mode", required=True)
    for mode in ("estimate", "curve", "filter"):
        mode_parser = bias_sub.add_parser(mode)
        mode_parser.add_argument("--dataset", required=True)
        mode_parser.add_argument("--pairs", "--synonyms", dest="pairs", required=True,
                                 help="TSV file of protected token pairs")
        mode_parser.add_argument("--epsilon", type=float, default=0.005,
                                 help="filter threshold on |soft shift|")
        _add_search_flags(mode_parser, default_k=2)
        _add_oracle_flags(mode_parser)
        _add_io_flags(mode_parser)

    neighbors = sub.add_parser("neighbors", help="dump constructed neighborhoods")
    neighbors.add_argument("--dataset", required=True)
    _add_search_flags(neighbors, default_k=1)
    _add_oracle_flags(neighbors)
    _add_io_flags(neighbors)

    validate = sub.add_parser("validate", help="re-check a report's found results")
    validate.add_argument("--report", required=True)
    validate.add_argument("--dataset", default=None,
                          help="dataset path; defaults to the one echoed in the report")
    _add_oracle_flags(validate)
    validate.add_argument("--out", default=None)
    validate.add_argument("--server", default=None)

    serve = sub.add_parser("serve", help="run the audit HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8070)

    serve_oracles = sub.add_parser(
        "serve-oracles",
        help="serve the builtin oracles over the oracle wire protocol (dev/testing)",
    )
    serve_oracles.add_argument("--dataset", required=True)
    serve_oracles.add_argument("--host", default="127.0.0.1")
    serve_oracles.add_argument("--port", type=int, default=8071)

    return parser


def _settings_from(args: argparse.Namespace) -> engine.RunSettings:
    blacklist = load_blacklist(args.blacklist) if getattr(args, "blacklist", None) else frozenset()
    return engine.RunSettings(
        k=args.k,
        beam_width=getattr(args, "beam", 20),
        kappa=args.kappa,
        delta=args.delta,
        epsilon=getattr(args, "epsilon", 0.005),
        sample_budget=args.sample_budget,
        enum_cap=args.enum_cap,
        trials=getattr(args, "trials", 50),
        seed=args.seed,
        workers=getattr(args, "workers", 1),
        blacklist=blacklist,
    )


def _endpoints_from(args: argparse.Namespace) -> engine.OracleEndpoints:
    return engine.OracleEndpoints(
        classifier=args.classifier,
        fillmask=args.fillmask,
        perplexity=args.ppl,
        batch_size=args.batch_size,
        timeout_s=args.timeout,
        retries=args.retries,
    )


def _provenance(args: argparse.Namespace, dataset: Dataset) -> dict:
    return {
        "dataset_path": dataset.source,
        "split": dataset.split,
        "pairs_path": getattr(args, "pairs", None),
        "blacklist_path": getattr(args, "blacklist", None),
    }


def _emit(report: dict, args: argparse.Namespace, summary: str) -> None:
    if args.out is None:
        if getattr(args, "format", "json") == "csv":
            raise ConfigError("--format csv requires --out")
        sys.stdout.write(json.dumps(report, ensure_ascii=False, indent=2) + "\n")
        return
    out = Path(args.out)
    if getattr(args, "format", "json") == "csv":
        footer = write_report_csv(report, out)
        print(f"{summary} -> {out} (aggregate in {footer})")
    else:
        write_report_json(report, out)
        print(f"{summary} -> {out}")


def _post(server: str, path: str, payload: dict) -> dict:
    response = httpx.post(server.rstrip("/") + path, json=payload, timeout=SERVER_TIMEOUT_S)
    if response.status_code != 200:
        raise AuditError(f"server returned {response.status_code}: {response.text[:300]}")
    return response.json()


def _inline_dataset(dataset: Dataset) -> list[dict]:
    return [{"text": " ".join(x), "label": label} for x, label in dataset.examples]


def _settings_payload(settings: engine.RunSettings) -> dict:
    return {
        "k": settings.k,
        "beam_width": settings.beam_width,
        "kappa": settings.kappa,
        "delta": settings.delta,
        "epsilon": settings.epsilon,
        "sample_budget": settings.sample_budget,
        "enum_cap": settings.enum_cap,
        "trials": settings.trials,
        "seed": settings.seed,
        "workers": settings.workers,
        "blacklist": sorted(settings.blacklist),
    }


def _run_attack(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    pairs = load_pairs(args.pairs)
    settings = _settings_from(args)
    endpoints = _endpoints_from(args)
    if args.server:
        report = _post(args.server, "/v1/attack", {
            "dataset": _inline_dataset(dataset),
            "synonyms": [[p.p1, p.p2] for p in pairs],
            "method": args.method,
            "settings": _settings_payload(settings),
            "oracles": endpoints.as_dict(),
        })
    else:
        report = engine.run_attack(
            dataset, pairs, args.method, settings, endpoints,
            provenance=_provenance(args, dataset),
        )
    agg = report["aggregate"]
    summary = (
        f"attack {args.method}: {agg['found']}/{agg['attempted']} found, "
        f"{agg['skipped']} skipped, success_rate={agg['success_rate']:.3f}"
    )
    _emit(report, args, summary)
    return 0


def _run_bias(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    pairs = load_pairs(args.pairs)
    settings = _settings_from(args)
    endpoints = _endpoints_from(args)
    path = {"estimate": "/v1/bias/estimate", "curve": "/v1/bias/curve",
            "filter": "/v1/bias/filter"}[args.mode]
    if args.server:
        report = _post(args.server, path, {
            "dataset": _inline_dataset(dataset),
            "pairs": [[p.p1, p.p2] for p in pairs],
            "settings": _settings_payload(settings),
            "oracles": endpoints.as_dict(),
        })
    elif args.mode == "filter":
        report = engine.run_bias_filter(
            dataset, pairs, settings, endpoints, provenance=_provenance(args, dataset)
        )
    else:
        report = engine.run_bias_estimate(
            dataset, pairs, settings, endpoints,
            provenance=_provenance(args, dataset), curve=(args.mode == "curve"),
        )
    agg = report["aggregate"]
    if args.mode == "filter":
        summary = f"bias filter: kept {agg['kept_total']} sentences across {agg['pairs_total']} pairs"
    else:
        summary = (
            f"bias {args.mode}: {agg['pairs_estimated']}/{agg['pairs_total']} pairs estimated, "
            f"{agg['pairs_skipped']} skipped"
        )
    _emit(report, args, summary)
    return 0


def _run_neighbors(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    settings = _settings_from(args)
    endpoints = _endpoints_from(args)
    if args.server:
        report = _post(args.server, "/v1/neighbors", {
            "dataset": _inline_dataset(dataset),
            "settings": _settings_payload(settings),
            "oracles": endpoints.as_dict(),
        })
    else:
        report = engine.run_neighbors(
            dataset, settings, endpoints, provenance=_provenance(args, dataset)
        )
    summary = f"neighbors: {report['aggregate']['member_total']} sentences constructed"
    _emit(report, args, summary)
    return 0


def _run_validate(args: argparse.Namespace) -> int:
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    dataset_path = args.dataset or report.get("config", {}).get("dataset_path")
    if not dataset_path or dataset_path == "<inline>":
        raise ConfigError("validate needs --dataset (report has no usable dataset path)")
    dataset = load_dataset(dataset_path)
    endpoints = _endpoints_from(args)
    if args.server:
        result = _post(args.server, "/v1/validate", {
            "report": report,
            "dataset": _inline_dataset(dataset),
            "oracles": endpoints.as_dict(),
        })
    else:
        result = engine.run_validate(report, dataset, endpoints)
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    if result["ok"]:
        print(f"validate: OK ({result['checked']} found results re-checked)")
        return 0
    for failure in result["failures"]:
        print(f"validate: FAIL {failure}", file=sys.stderr)
    return 1


def _run_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_audit_app

    uvicorn.run(create_audit_app(), host=args.host, port=args.port)
    return 0


def _run_serve_oracles(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_oracle_app

    dataset = load_dataset(args.dataset)
    classifier, fillmask, perplexity = engine.build_backends(
        engine.OracleEndpoints(), dataset, kappa=20
    )
    uvicorn.run(create_oracle_app(classifier, fillmask, perplexity),
                host=args.host, port=args.port)
    return 0


_DISPATCH = {
    "attack": _run_attack,
    "bias": _run_bias,
    "neighbors": _run_neighbors,
    "validate": _run_validate,
    "serve": _run_serve,
    "serve-oracles": _run_serve_oracles,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"soaudit: {exc}", file=sys.stderr)
        return 2
    except (AuditError, OSError, httpx.HTTPError) as exc:
        print(f"soaudit: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
