"""Dataset and lexicon ingestion, quality metrics, and report assembly.

Reports are plain JSON dicts with a fixed key layout so identical seeded runs
serialize byte-identically.  The only volatile content is wall-clock time,
isolated in ``started_at``, ``finished_at``, and
``aggregate.mean_wall_time_s``; ``strip_volatile`` removes exactly those for
reproducibility comparisons.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .attack import ExampleOutcome, attack_mode_params
from .errors import EmptyInput, LabelError, ParseError, SelfPairError
from .neighborhood import NeighborParams, kept_candidates
from .oracles.base import CallStats, OracleSuite, hard_label
from .textcore import (
    PatchPair,
    Sentence,
    apply_patch,
    as_sentence,
    is_valid_token,
    l0_distance,
    occurrence_count,
    patch_position,
    tokenize,
)

VOLATILE_TOP_LEVEL = ("started_at", "finished_at")
VOLATILE_AGGREGATE = ("mean_wall_time_s",)


@dataclass(frozen=True)
class Dataset:
    """Labeled sentences plus where they came from."""

    examples: tuple[tuple[Sentence, int], ...]
    source: str
    split: str

    @property
    def sentences(self) -> tuple[Sentence, ...]:
        return tuple(x for x, _ in self.examples)


def load_dataset(path: str | Path, split: str | None = None) -> Dataset:
    """Read a JSONL dataset: one {"text": str, "label": 0|1} object per line."""
    path = Path(path)
    examples: list[tuple[Sentence, int]] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict) or "text" not in record or "label" not in record:
                raise ParseError(f"{path}:{lineno}: expected object with 'text' and 'label'")
            label = record["label"]
            if isinstance(label, bool) or label not in (0, 1):
                raise LabelError(f"{path}:{lineno}: label {label!r} outside {{0, 1}}")
            text = record["text"]
            if not isinstance(text, str):
                raise ParseError(f"{path}:{lineno}: 'text' must be a string")
            try:
                sentence = tokenize(text)
            except EmptyInput as exc:
                raise ParseError(f"{path}:{lineno}: empty text") from exc
            examples.append((sentence, label))
    return Dataset(examples=tuple(examples), source=str(path), split=split or path.stem)


def load_pairs(path: str | Path) -> list[PatchPair]:
    """Read a TSV pair file: "p1<TAB>p2" per line, '#' comments allowed.

    Pairs are lowercased; duplicates are dropped keeping the first occurrence
    (selection tie-breaks depend on file order).
    """
    path = Path(path)
    pairs: list[PatchPair] = []
    seen: set[PatchPair] = set()
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split("\t")
            if len(fields) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'p1<TAB>p2', got {stripped!r}")
            p1, p2 = fields[0].strip().lower(), fields[1].strip().lower()
            if not (is_valid_token(p1) and is_valid_token(p2)):
                raise ParseError(f"{path}:{lineno}: pair words must be single tokens")
            if p1 == p2:
                raise SelfPairError(f"{path}:{lineno}: identical pair {p1!r}")
            pair = PatchPair(p1, p2)
            if pair not in seen:
                seen.add(pair)
                pairs.append(pair)
    return pairs


def load_blacklist(path: str | Path) -> frozenset[str]:
    """Read a token blacklist: one lowercase token per line, '#' comments allowed."""
    path = Path(path)
    tokens: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tok = stripped.lower()
            if not is_valid_token(tok):
                raise ParseError(f"{path}:{lineno}: invalid blacklist token {stripped!r}")
            tokens.add(tok)
    return frozenset(tokens)


def median_low(values: Sequence[float]) -> float | None:
    """Median using the lower-middle element for even counts; None when empty."""
    if not values:
        return None
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass(frozen=True)
class QualityMetrics:
    """Aggregate attack quality over one run.

    Perplexity medians cover successful attacks only (medians rather than
    means because a few degenerate sentences blow up perplexity).
    """

    attempted: int
    found: int
    skipped: int
    success_rate: float
    median_original_ppl: float | None
    median_perturbed_ppl: float | None
    mean_l0: float | None
    mean_wall_time_s: float
    classifier_calls: CallStats
    fillmask_calls: CallStats

    def as_dict(self) -> dict:
        return {
            "attempted": self.attempted,
            "found": self.found,
            "skipped": self.skipped,
            "success_rate": self.success_rate,
            "median_original_ppl": self.median_original_ppl,
            "median_perturbed_ppl": self.median_perturbed_ppl,
            "mean_l0": self.mean_l0,
            "classifier_calls": self.classifier_calls.as_dict(),
            "fillmask_calls": self.fillmask_calls.as_dict(),
            "mean_wall_time_s": self.mean_wall_time_s,
        }


def quality_metrics(outcomes: Sequence[ExampleOutcome], ppl_oracle=None) -> QualityMetrics:
    """Success rate, perplexity medians, and distance/traffic aggregates."""
    attempted = [o for o in outcomes if not o.skipped]
    skipped = len(outcomes) - len(attempted)
    found = [o for o in attempted if o.result.found]
    clf = CallStats()
    fm = CallStats()
    wall = 0.0
    for o in attempted:
        clf = clf.add(o.result.classifier_calls)
        fm = fm.add(o.result.fillmask_calls)
        wall += o.result.wall_time_s
    original_ppl = perturbed_ppl = None
    if ppl_oracle is not None and found:
        original_ppl = median_low([ppl_oracle.ppl(o.x0) for o in found])
        perturbed_ppl = median_low([ppl_oracle.ppl(o.result.vulnerable) for o in found])
    return QualityMetrics(
        attempted=len(attempted),
        found=len(found),
        skipped=skipped,
        success_rate=(len(found) / len(attempted)) if attempted else 0.0,
        median_original_ppl=original_ppl,
        median_perturbed_ppl=perturbed_ppl,
        mean_l0=(math.fsum(o.result.distance for o in found) / len(found)) if found else None,
        mean_wall_time_s=(wall / len(attempted)) if attempted else 0.0,
        classifier_calls=clf,
        fillmask_calls=fm,
    )


def _tokens_or_none(x: Sentence | None) -> list[str] | None:
    return list(x) if x is not None else None


def outcome_record(outcome: ExampleOutcome) -> dict:
    """Per-example report record; schema shared by JSON and CSV emitters."""
    if outcome.skipped:
        return {
            "index": outcome.index,
            "input_tokens": list(outcome.x0),
            "patch": None,
            "status": "skipped",
            "vulnerable_tokens": None,
            "distance": None,
            "iterations": 0,
            "loss_trace": [],
            "chain": None,
            "calls": {"classifier": CallStats().as_dict(), "fillmask": CallStats().as_dict()},
            "skip_reason": outcome.skip_reason,
        }
    r = outcome.result
    return {
        "index": outcome.index,
        "input_tokens": list(outcome.x0),
        "patch": [r.patch.p1, r.patch.p2],
        "status": r.status,
        "vulnerable_tokens": _tokens_or_none(r.vulnerable),
        "distance": r.distance,
        "iterations": r.iterations,
        "loss_trace": list(r.loss_trace),
        "chain": [list(s) for s in r.chain] if r.chain else None,
        "calls": {
            "classifier": r.classifier_calls.as_dict(),
            "fillmask": r.fillmask_calls.as_dict(),
        },
        "skip_reason": None,
    }


def build_report(
    config: dict,
    examples: list[dict],
    aggregate: dict,
    started_at: str,
    finished_at: str,
) -> dict:
    return {
        "config": config,
        "examples": examples,
        "aggregate": aggregate,
        "version": __version__,
        "started_at": started_at,
        "finished_at": finished_at,
    }


def strip_volatile(report: dict) -> dict:
    """Copy of a report without wall-clock fields.

    Two runs with identical config, seed, and deterministic oracles agree
    exactly on everything that survives this strip.
    """
    stripped = copy.deepcopy(report)
    for key in VOLATILE_TOP_LEVEL:
        stripped.pop(key, None)
    aggregate = stripped.get("aggregate")
    if isinstance(aggregate, dict):
        for key in VOLATILE_AGGREGATE:
            aggregate.pop(key, None)
    return stripped


def report_json_bytes(report: dict) -> bytes:
    return (json.dumps(report, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def write_report_json(report: dict, path: str | Path) -> None:
    Path(path).write_bytes(report_json_bytes(report))


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        if all(isinstance(v, str) for v in value):
            return " ".join(value)
        return json.dumps(value)
    if isinstance(value, dict):
        return json.dumps(value)
    return str(value)


def write_report_csv(report: dict, path: str | Path) -> Path:
    """One CSV row per example; aggregate lands in a sibling footer file.

    Numeric cells use ``repr`` so CSV and JSON carry identical values.
    Returns the footer path.
    """
    path = Path(path)
    examples = report.get("examples", [])
    columns: list[str] = []
    for record in examples:
        for key in record:
            if key not in columns:
                columns.append(key)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for record in examples:
            writer.writerow([_csv_cell(record.get(col)) for col in columns])
    footer = path.with_name(path.stem + ".aggregate.csv")
    flat = _flatten(report.get("aggregate", {}))
    with footer.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["key", "value"])
        for key, value in flat:
            writer.writerow([key, _csv_cell(value)])
    return footer


def _flatten(obj, prefix: str = "") -> list[tuple[str, object]]:
    items: list[tuple[str, object]] = []
    if isinstance(obj, dict):
        for key, value in obj.items():
            items.extend(_flatten(value, f"{prefix}{key}."))
    else:
        items.append((prefix[:-1], obj))
    return items


def validate_report(
    report: dict,
    oracles: OracleSuite,
    neighbor_params: NeighborParams,
) -> list[str]:
    """Re-check every found result in an attack report against the oracles.

    Verifies: the patch word occurs exactly once in the vulnerable sentence,
    the hard prediction still flips, the recorded distance matches and stays
    within k, and the recorded expansion chain is reproducible (each step is
    one substitution at a non-frozen position with a candidate the fill-mask
    threshold actually keeps).  Returns a list of human-readable failures;
    empty means the report validates.  Reports without found results (bias,
    neighbors) validate trivially.
    """
    failures: list[str] = []
    k = report.get("config", {}).get("k")
    for record in report.get("examples", []):
        if record.get("status") != "found":
            continue
        index = record.get("index")
        try:
            x0 = as_sentence(record["input_tokens"])
            vulnerable = as_sentence(record["vulnerable_tokens"])
            p = PatchPair(record["patch"][0], record["patch"][1])
        except Exception as exc:  # malformed record
            failures.append(f"example {index}: unreadable record: {exc}")
            continue
        if occurrence_count(vulnerable, p.p1) != 1:
            failures.append(f"example {index}: patch word not unique in vulnerable sentence")
            continue
        probs = oracles.classifier.predict_soft([vulnerable, apply_patch(vulnerable, p)])
        if hard_label(probs[1]) - hard_label(probs[0]) == 0:
            failures.append(f"example {index}: prediction no longer flips")
        distance = l0_distance(x0, vulnerable)
        if record.get("distance") != distance:
            failures.append(
                f"example {index}: recorded distance {record.get('distance')} != {distance}"
            )
        if isinstance(k, int) and distance > k:
            failures.append(f"example {index}: distance {distance} exceeds k={k}")
        chain = record.get("chain")
        failures.extend(
            f"example {index}: {problem}"
            for problem in _check_chain(chain, x0, vulnerable, p, neighbor_params, oracles)
        )
    return failures


def _check_chain(
    chain,
    x0: Sentence,
    vulnerable: Sentence,
    p: PatchPair,
    base_params: NeighborParams,
    oracles: OracleSuite,
) -> Iterable[str]:
    if not chain:
        yield "missing expansion chain"
        return
    try:
        sentences = [as_sentence(step) for step in chain]
    except Exception as exc:
        yield f"unreadable chain: {exc}"
        return
    if sentences[0] != x0 or sentences[-1] != vulnerable:
        yield "chain endpoints do not match input/vulnerable sentences"
        return
    try:
        pos = patch_position(x0, p.p1)
    except Exception:
        yield "patch word not unique in input sentence"
        return
    params = attack_mode_params(base_params, max(len(sentences) - 1, 1), x0, p)
    for step, (prev, cur) in enumerate(zip(sentences, sentences[1:]), start=1):
        if len(prev) != len(cur):
            yield f"chain step {step} changes sentence length"
            return
        changed = [i for i, (a, b) in enumerate(zip(prev, cur)) if a != b]
        if len(changed) != 1:
            yield f"chain step {step} changes {len(changed)} positions, expected 1"
            return
        i = changed[0]
        if i == pos or i in params.frozen_positions:
            yield f"chain step {step} modifies a frozen position"
            return
        if cur[i] in params.token_blacklist:
            yield f"chain step {step} introduces blacklisted token {cur[i]!r}"
            return
        if cur[i] not in kept_candidates(prev, i, params, oracles.fillmask):
            yield (
                f"chain step {step} token {cur[i]!r} is not a kept fill-mask "
                f"candidate at position {i}"
            )
            return
