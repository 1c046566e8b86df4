"""Classification metrics and inter-rater agreement.

Per-class precision/recall/F1 over matched gold/predicted label sets,
chance-corrected agreement (Krippendorff's alpha with ordinal weights
and a percentile bootstrap CI, Cohen's kappa pooled over nominal
labels), and mean/SD aggregation of per-run effort numbers.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Sequence

# ordinal coding for the three-class requirement scale
REQUIREMENT_ORDINAL_CODING = {"unmet": 0, "partially_met": 1, "met": 2}


class IdMismatch(ValueError):
    pass


class NoVariance(ArithmeticError):
    """Expected disagreement is zero; alpha is undefined, not 1.0."""


class DegenerateMarginals(ArithmeticError):
    """Chance agreement is one; kappa is undefined."""


@dataclass(frozen=True)
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass(frozen=True)
class PRF1:
    precision: float
    recall: float
    f1: float


def confusion(gold: dict[str, str], pred: dict[str, str]) -> dict[str, ClassCounts]:
    """Per-class TP/FP/FN over items matched by id."""
    if set(gold) != set(pred):
        missing = set(gold) ^ set(pred)
        raise IdMismatch(f"gold and predicted ids differ on: {sorted(missing)[:5]}")
    labels = sorted(set(gold.values()) | set(pred.values()))
    counts = {}
    for label in labels:
        tp = sum(1 for i in gold if gold[i] == label and pred[i] == label)
        fp = sum(1 for i in gold if gold[i] != label and pred[i] == label)
        fn = sum(1 for i in gold if gold[i] == label and pred[i] != label)
        counts[label] = ClassCounts(tp=tp, fp=fp, fn=fn)
    return counts


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean with the 0/0 -> 0 convention."""
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def prf1(counts: ClassCounts) -> PRF1:
    """Precision/recall/F1 with the 0/0 -> 0 convention for empty classes."""
    if counts.tp < 0 or counts.fp < 0 or counts.fn < 0:
        raise ValueError("counts must be non-negative")
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    return PRF1(precision=precision, recall=recall, f1=f1_score(precision, recall))


# -- Krippendorff's alpha ------------------------------------------------------


def _pairable_units(matrix: Sequence[Sequence[Any]]) -> list[list[Any]]:
    if not matrix or len(matrix) < 2:
        raise ValueError("need at least two raters")
    width = len(matrix[0])
    if any(len(row) != width for row in matrix):
        raise ValueError("all rater rows must have equal length")
    units = []
    for item in range(width):
        values = [row[item] for row in matrix if row[item] is not None]
        if len(values) >= 2:
            units.append(values)
    return units


def _ordinal_deltas(frequencies: Counter) -> dict[tuple[Any, Any], float]:
    """Squared ordinal distances from marginal value frequencies.

    The distance between two values is the number of ratings lying
    between them on the scale (inclusive, with the endpoints counted at
    half weight), squared. Any strictly monotone recoding of the values
    leaves these distances unchanged.
    """
    ordered = sorted(frequencies)
    deltas: dict[tuple[Any, Any], float] = {}
    for i, a in enumerate(ordered):
        for j in range(i, len(ordered)):
            b = ordered[j]
            if a == b:
                deltas[(a, b)] = 0.0
                continue
            between = sum(frequencies[ordered[k]] for k in range(i, j + 1))
            d = between - (frequencies[a] + frequencies[b]) / 2.0
            deltas[(a, b)] = d * d
            deltas[(b, a)] = d * d
    return deltas


def krippendorff_alpha(matrix: Sequence[Sequence[Any]], scale: str = "ordinal") -> float:
    """Agreement over a raters-by-items matrix; None marks a missing rating.

    Observed disagreement averages pairwise distances within each item;
    expected disagreement averages them over all pairable ratings pooled
    together. Raises NoVariance when expected disagreement is zero.
    """
    if scale not in ("ordinal", "nominal"):
        raise ValueError(f"unsupported scale {scale!r}")
    units = _pairable_units(matrix)
    if not units:
        raise ValueError("no item with at least two ratings")
    pooled = Counter(v for unit in units for v in unit)
    n = sum(pooled.values())

    if scale == "ordinal":
        deltas = _ordinal_deltas(pooled)

        def dist(a: Any, b: Any) -> float:
            return deltas[(a, b)]

    else:

        def dist(a: Any, b: Any) -> float:
            return 0.0 if a == b else 1.0

    observed = 0.0
    for unit in units:
        within = sum(dist(a, b) for a in unit for b in unit)
        observed += within / (len(unit) - 1)
    observed /= n

    expected = 0.0
    for a, count_a in pooled.items():
        for b, count_b in pooled.items():
            if a == b:
                continue
            expected += count_a * count_b * dist(a, b)
    expected /= n * (n - 1)

    if expected == 0.0:
        raise NoVariance("all pairable ratings are identical; alpha is undefined")
    return 1.0 - observed / expected


@dataclass(frozen=True)
class BootstrapCI:
    low: float
    high: float
    resamples_used: int
    resamples_skipped: int


def _percentile(sorted_values: list[float], q: float) -> float:
    """Linear-interpolation percentile, q in [0, 100]."""
    if not sorted_values:
        raise ValueError("no values")
    if len(sorted_values) == 1:
        return sorted_values[0]
    rank = (q / 100.0) * (len(sorted_values) - 1)
    lower = math.floor(rank)
    upper = math.ceil(rank)
    if lower == upper:
        return sorted_values[lower]
    weight = rank - lower
    return sorted_values[lower] * (1 - weight) + sorted_values[upper] * weight


def bootstrap_ci(
    matrix: Sequence[Sequence[Any]],
    resamples: int = 10_000,
    seed: int = 0,
    scale: str = "ordinal",
) -> BootstrapCI:
    """95% percentile CI for alpha via item resampling; deterministic per seed.

    Resamples whose expected disagreement collapses to zero are skipped
    and counted rather than treated as perfect agreement.
    """
    if resamples < 1000:
        raise ValueError("need at least 1000 bootstrap resamples")
    n_items = len(matrix[0])
    rng = random.Random(seed)
    alphas = []
    skipped = 0
    for _ in range(resamples):
        chosen = [rng.randrange(n_items) for _ in range(n_items)]
        resampled = [[row[i] for i in chosen] for row in matrix]
        try:
            alphas.append(krippendorff_alpha(resampled, scale=scale))
        except (NoVariance, ValueError):
            skipped += 1
    if not alphas:
        raise NoVariance("every bootstrap resample was degenerate")
    alphas.sort()
    return BootstrapCI(
        low=_percentile(alphas, 2.5),
        high=_percentile(alphas, 97.5),
        resamples_used=len(alphas),
        resamples_skipped=skipped,
    )


# -- Cohen's kappa -------------------------------------------------------------


@dataclass(frozen=True)
class KappaStats:
    kappa: float
    observed_agreement: float
    expected_agreement: float


def cohens_kappa(gold: Sequence[Any], pred: Sequence[Any]) -> KappaStats:
    """Two raters, nominal labels, pooled across all items."""
    if len(gold) != len(pred) or not gold:
        raise ValueError("need two equal-length, non-empty label sequences")
    n = len(gold)
    observed = sum(1 for g, p in zip(gold, pred) if g == p) / n
    gold_counts = Counter(gold)
    pred_counts = Counter(pred)
    expected = sum(
        (gold_counts[label] / n) * (pred_counts[label] / n)
        for label in set(gold_counts) | set(pred_counts)
    )
    if expected == 1.0:
        raise DegenerateMarginals("both raters use a single label; kappa is undefined")
    return KappaStats(
        kappa=(observed - expected) / (1.0 - expected),
        observed_agreement=observed,
        expected_agreement=expected,
    )


@dataclass(frozen=True)
class AgreementStats:
    alpha: float
    ci_low: float
    ci_high: float
    kappa: float
    observed_agreement: float


def compute_agreement(
    requirement_matrix: Sequence[Sequence[Any]],
    ac_gold: Sequence[Any],
    ac_pred: Sequence[Any],
    resamples: int = 10_000,
    seed: int = 0,
) -> AgreementStats:
    """Requirement-level alpha (ordinal) plus AC-level kappa (nominal)."""
    alpha = krippendorff_alpha(requirement_matrix, scale="ordinal")
    ci = bootstrap_ci(requirement_matrix, resamples=resamples, seed=seed, scale="ordinal")
    kappa = cohens_kappa(ac_gold, ac_pred)
    return AgreementStats(
        alpha=alpha,
        ci_low=ci.low,
        ci_high=ci.high,
        kappa=kappa.kappa,
        observed_agreement=kappa.observed_agreement,
    )


# -- per-run aggregates ----------------------------------------------------------


@dataclass(frozen=True)
class MeanSD:
    mean: float
    sd: float


AGGREGATE_FIELDS = ("steps", "time", "input_tokens", "output_tokens", "cost")


def _mean_sd(values: list[float], sample: bool) -> MeanSD:
    n = len(values)
    mean = sum(values) / n
    divisor = n - 1 if sample and n > 1 else n
    variance = sum((v - mean) ** 2 for v in values) / divisor
    return MeanSD(mean=mean, sd=math.sqrt(variance))


def aggregate_runs(
    run_metrics: Iterable[dict[str, float]], sample_sd: bool = False
) -> dict[str, MeanSD]:
    """Mean and SD per effort field; population SD unless sample_sd."""
    rows = list(run_metrics)
    if not rows:
        raise ValueError("need at least one terminated run")
    return {
        name: _mean_sd([float(row[name]) for row in rows], sample_sd)
        for name in AGGREGATE_FIELDS
    }


def run_metrics_from_log(path: str | Path) -> dict[str, Any]:
    """Effort numbers from the metadata line of a run log."""
    with open(path, encoding="utf-8") as fh:
        meta = json.loads(fh.readline())
    if meta.get("type") != "run":
        raise ValueError(f"{path} does not start with a run metadata line")
    elapsed = 0.0
    if meta.get("started_at") and meta.get("finished_at"):
        elapsed = (
            datetime.fromisoformat(meta["finished_at"])
            - datetime.fromisoformat(meta["started_at"])
        ).total_seconds()
    usage = meta.get("total_usage", {})
    return {
        "steps": float(meta.get("steps", 0)),
        "time": elapsed,
        "input_tokens": float(usage.get("input_tokens", 0)),
        "output_tokens": float(usage.get("output_tokens", 0)),
        "cost": float(meta.get("cost", 0.0)),
        "setup_id": meta.get("setup_id", ""),
    }
