"""Classification metrics with percentile-bootstrap confidence intervals,
the Bernoulli random baseline, quantile-binned calibration curves, and
predicted-probability distribution statistics.

AUROC uses the rank formulation (ties get half credit), which equals the
probability that a random positive outranks a random negative.
"""

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class MetricValue:
    value: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class MetricReport:
    name: str
    auroc: MetricValue
    accuracy: MetricValue
    precision: MetricValue
    recall: MetricValue
    f1: MetricValue


@dataclass(frozen=True)
class CalibrationBin:
    mean_predicted: float
    positive_share: float
    count: int


@dataclass(frozen=True)
class DistributionStats:
    mean: float
    std: float
    minimum: float
    maximum: float
    count: int
    percentiles: dict[int, float]


PERCENTILE_LEVELS = (1, 5, 10, 25, 50, 75, 90, 95, 99)


def auroc(scores, labels) -> float:
    """Rank-based AUROC with half credit for ties. Errors when labels
    contain a single class."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC requires both classes")
    ranks = rankdata(scores, method="average")
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def threshold_metrics(scores, labels, threshold: float = 0.5):
    """Accuracy, precision, recall, F1 at a fixed threshold (prediction is
    positive when score >= threshold). Precision with zero predicted
    positives is 0 with a warning."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if len(scores) == 0:
        raise ValueError("empty inputs")
    preds = scores >= threshold
    actual = labels == 1
    tp = int(np.sum(preds & actual))
    fp = int(np.sum(preds & ~actual))
    fn = int(np.sum(~preds & actual))
    tn = int(np.sum(~preds & ~actual))

    accuracy = (tp + tn) / len(labels)
    if tp + fp == 0:
        warnings.warn("no predicted positives; precision set to 0")
        precision = 0.0
    else:
        precision = tp / (tp + fp)
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return accuracy, precision, recall, f1


def bootstrap_ci(
    scores,
    labels,
    metric,
    B: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for metric(scores, labels).

    Resamples that the metric rejects (e.g. single-class draws for AUROC)
    are redrawn. Deterministic under the seed.
    """
    if B < 100:
        raise ValueError("B must be >= 100")
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n = len(scores)
    rng = np.random.default_rng(seed)
    stats = np.empty(B)
    for i in range(B):
        for _ in range(1000):
            idx = rng.integers(0, n, size=n)
            try:
                stats[i] = metric(scores[idx], labels[idx])
                break
            except ValueError:
                continue
        else:
            raise ValueError("could not draw a valid bootstrap resample")
    low, high = np.percentile(stats, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(low), float(high)


def random_baseline(labels, rate: float, seed: int = 0, B: int = 1000, alpha: float = 0.05) -> MetricReport:
    """Metrics of a classifier that assigns a positive label with the
    given probability. AUROC is 0.5 by convention."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    labels = np.asarray(labels, dtype=float)
    rng = np.random.default_rng(seed)
    preds = (rng.random(len(labels)) < rate).astype(float)

    def _with_ci(fn_index):
        value = threshold_metrics(preds, labels)[fn_index]
        low, high = bootstrap_ci(
            preds, labels, lambda s, l: threshold_metrics(s, l)[fn_index], B=B, alpha=alpha, seed=seed
        )
        return MetricValue(value, low, high)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return MetricReport(
            name="random_baseline",
            auroc=MetricValue(0.5, 0.5, 0.5),
            accuracy=_with_ci(0),
            precision=_with_ci(1),
            recall=_with_ci(2),
            f1=_with_ci(3),
        )


def evaluate_scores(
    scores, labels, name: str, threshold: float = 0.5, B: int = 1000, alpha: float = 0.05, seed: int = 0
) -> MetricReport:
    """Full Table-1-style row: AUROC + threshold metrics, each with a
    percentile-bootstrap interval."""
    acc, prec, rec, f1 = threshold_metrics(scores, labels, threshold)

    def ci(metric):
        return bootstrap_ci(scores, labels, metric, B=B, alpha=alpha, seed=seed)

    au = auroc(scores, labels)
    au_ci = ci(auroc)
    acc_ci = ci(lambda s, l: threshold_metrics(s, l, threshold)[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        prec_ci = ci(lambda s, l: threshold_metrics(s, l, threshold)[1])
        rec_ci = ci(lambda s, l: threshold_metrics(s, l, threshold)[2])
        f1_ci = ci(lambda s, l: threshold_metrics(s, l, threshold)[3])
    return MetricReport(
        name=name,
        auroc=MetricValue(au, *au_ci),
        accuracy=MetricValue(acc, *acc_ci),
        precision=MetricValue(prec, *prec_ci),
        recall=MetricValue(rec, *rec_ci),
        f1=MetricValue(f1, *f1_ci),
    )


def calibration_bins(probs, labels, n_bins: int) -> list[CalibrationBin]:
    """Quantile binning by predicted probability; per-bin mean prediction
    and empirical positive share. Bins are merged (with a warning) when
    there are too few distinct probabilities."""
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    edges = np.quantile(probs, np.linspace(0, 1, n_bins + 1))
    unique_edges = np.unique(edges)
    if len(unique_edges) < len(edges):
        warnings.warn("fewer distinct probabilities than bins; merging bins")
    if len(unique_edges) < 2:
        return [CalibrationBin(float(np.mean(probs)), float(np.mean(labels)), len(probs))]

    assignment = np.searchsorted(unique_edges[1:-1], probs, side="right")
    bins = []
    for b in range(len(unique_edges) - 1):
        mask = assignment == b
        if not np.any(mask):
            continue
        bins.append(
            CalibrationBin(
                mean_predicted=float(np.mean(probs[mask])),
                positive_share=float(np.mean(labels[mask])),
                count=int(np.sum(mask)),
            )
        )
    return bins


def distribution_stats(probs) -> DistributionStats:
    """Mean, sample std dev, extremes, and linear-interpolation
    percentiles of the predicted probabilities."""
    probs = np.asarray(probs, dtype=float)
    if len(probs) == 0:
        raise ValueError("empty inputs")
    std = float(np.std(probs, ddof=1)) if len(probs) > 1 else 0.0
    return DistributionStats(
        mean=float(np.mean(probs)),
        std=std,
        minimum=float(np.min(probs)),
        maximum=float(np.max(probs)),
        count=len(probs),
        percentiles={p: float(np.percentile(probs, p)) for p in PERCENTILE_LEVELS},
    )


# ---------------------------------------------------------------------------
# Report artifacts


def _metric_value_dict(mv: MetricValue) -> dict:
    return {"value": mv.value, "ci_low": mv.ci_low, "ci_high": mv.ci_high}


def write_metrics_report(reports: list[MetricReport], path: str | Path) -> None:
    payload = {
        "rows": [
            {
                "model": r.name,
                "auroc": _metric_value_dict(r.auroc),
                "accuracy": _metric_value_dict(r.accuracy),
                "precision": _metric_value_dict(r.precision),
                "recall": _metric_value_dict(r.recall),
                "f1": _metric_value_dict(r.f1),
            }
            for r in reports
        ]
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_calibration_csv(bins: list[CalibrationBin], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["mean_predicted", "positive_share", "count"])
        for b in bins:
            writer.writerow([repr(b.mean_predicted), repr(b.positive_share), b.count])


def write_prob_stats(stats: DistributionStats, path: str | Path) -> None:
    payload = {
        "mean": stats.mean,
        "std": stats.std,
        "min": stats.minimum,
        "max": stats.maximum,
        "count": stats.count,
        "percentiles": {str(k): v for k, v in stats.percentiles.items()},
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
