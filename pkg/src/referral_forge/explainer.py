"""Attribution and editorial ratings: Integrated Gradients over a
differentiable scorer, sentence-level attribution shares, and
strong/weak/moderate ratings for the request, its title, and each
sentence.

The differentiable scorer is the reward head applied to mean-pooled token
embeddings, so attributions are computed on the logit scale and the path
integral has a closed form for the linear head. When the embedding
provider cannot return token embeddings, attribution falls back to
leave-one-sentence-out occlusion (normalized probability drops), flagged
in the report.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .text import combine_title_body, split_sentences, tokenize


@dataclass(frozen=True)
class SentenceSpan:
    start: int
    end: int
    is_title: bool
    text: str


def segment(title: str, body: str) -> list[SentenceSpan]:
    """Title as one span, body split at sentence terminators. Spans
    partition the token sequence of title+newline+body; mask tokens are
    never split."""
    spans = []
    pos = len(tokenize(title))
    spans.append(SentenceSpan(0, pos, True, title))
    for chunk in split_sentences(body):
        toks = tokenize(chunk)
        if not toks:
            continue
        spans.append(SentenceSpan(pos, pos + len(toks), False, chunk))
        pos += len(toks)
    return spans


class PooledLinearScorer:
    """Reward head over mean-pooled token embeddings: maps a (T, D) token
    matrix to a logit and exposes the analytic gradient."""

    def __init__(self, weights: np.ndarray, bias: float):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = float(bias)

    def score(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape[0] == 0:
            return self.bias
        return float(self.weights @ x.mean(axis=0) + self.bias)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = max(1, x.shape[0])
        return np.tile(self.weights / t, (x.shape[0], 1))


def integrated_gradients(
    scorer, x: np.ndarray, baseline: np.ndarray | None = None, steps: int = 64
) -> np.ndarray:
    """Midpoint-Riemann approximation of the Integrated Gradients path
    integral: (x - x') ⊙ mean over alpha of grad(x' + alpha (x - x'))."""
    x = np.asarray(x, dtype=float)
    if baseline is None:
        baseline = np.zeros_like(x)
    baseline = np.asarray(baseline, dtype=float)
    if baseline.shape != x.shape:
        raise ValueError("baseline shape must match input shape")
    if steps < 1:
        raise ValueError("steps must be >= 1")

    diff = x - baseline
    total = np.zeros_like(x)
    for i in range(steps):
        alpha = (i + 0.5) / steps
        grad = np.asarray(scorer.gradient(baseline + alpha * diff), dtype=float)
        if not np.all(np.isfinite(grad)):
            raise ValueError("non-finite gradient during integration")
        total += grad
    return diff * total / steps


def completeness_residual(scorer, x, baseline, attributions) -> float:
    if baseline is None:
        baseline = np.zeros_like(x)
    return abs(float(np.sum(attributions)) - (scorer.score(x) - scorer.score(baseline)))


def sentence_attributions(
    token_dim_attributions: np.ndarray, spans: list[SentenceSpan]
) -> tuple[list[float], list[float] | None, bool]:
    """Sum over embedding dimensions, then over each span's tokens, then
    normalize by the total.

    Returns (raw, shares, degenerate). A zero total leaves shares
    undefined (degenerate); a negative total normalizes by the sum of
    absolute raw values, flagged degenerate.
    """
    token_scores = np.asarray(token_dim_attributions, dtype=float)
    if token_scores.ndim == 2:
        token_scores = token_scores.sum(axis=1)
    raw = [float(token_scores[s.start : s.end].sum()) for s in spans]
    return _normalize_raw(raw)


def _normalize_raw(raw: list[float]) -> tuple[list[float], list[float] | None, bool]:
    total = sum(raw)
    if total == 0.0:
        return raw, None, True
    if total < 0.0:
        abs_total = sum(abs(r) for r in raw)
        return raw, [r / abs_total for r in raw], True
    return raw, [r / total for r in raw], False


RATING_ORDER = ["weak", "moderate", "strong"]


@dataclass
class RatingPolicy:
    """Thresholds calibrated on training data: overall terciles of p,
    z-score cutoffs for sentence shares, and per-length-bucket reference
    distributions of title shares."""

    weak_max: float
    strong_min: float
    z_weak: float
    z_strong: float
    length_edges: np.ndarray  # interior decile edges of request token length
    bucket_shares: list[np.ndarray]  # sorted title shares per bucket

    def __post_init__(self):
        if not self.weak_max < self.strong_min:
            raise ValueError("weak_max must be below strong_min")


def _shift_toward(rating: str, direction: str) -> str:
    idx = RATING_ORDER.index(rating)
    if direction == "strong":
        idx = min(idx + 1, 2)
    elif direction == "weak":
        idx = max(idx - 1, 0)
    return RATING_ORDER[idx]


def _bucket_for_length(policy: RatingPolicy, length: int) -> np.ndarray:
    idx = int(np.searchsorted(policy.length_edges, length, side="right"))
    if len(policy.bucket_shares[idx]) > 0:
        return policy.bucket_shares[idx]
    warnings.warn(f"length bucket {idx} is empty; using nearest populated bucket")
    for offset in range(1, len(policy.bucket_shares)):
        for j in (idx - offset, idx + offset):
            if 0 <= j < len(policy.bucket_shares) and len(policy.bucket_shares[j]) > 0:
                return policy.bucket_shares[j]
    raise ValueError("rating policy has no populated title-share buckets")


def _midrank_percentile(sorted_values: np.ndarray, value: float) -> float:
    less = float(np.searchsorted(sorted_values, value, side="left"))
    upto = float(np.searchsorted(sorted_values, value, side="right"))
    return 100.0 * (less + 0.5 * (upto - less)) / len(sorted_values)


def rate(
    p: float,
    shares: list[float] | None,
    spans: list[SentenceSpan],
    policy: RatingPolicy,
) -> tuple[str, str, list[str]]:
    """Overall/title/sentence ratings.

    Overall comes from the p terciles. Sentence ratings come from the
    z-score of each share against the within-request share distribution
    (uniform mean 1/n), then shift one step toward the overall rating when
    it is strong or weak. Title rating is the percentile of the title
    share within its request-length bucket. Degenerate shares rate every
    span moderate.
    """
    if p <= policy.weak_max:
        overall = "weak"
    elif p >= policy.strong_min:
        overall = "strong"
    else:
        overall = "moderate"

    n_sentences = sum(1 for s in spans if not s.is_title)
    if shares is None:
        return overall, "moderate", ["moderate"] * n_sentences

    arr = np.asarray(shares, dtype=float)
    std = float(np.std(arr))
    mean = float(np.mean(arr))

    sentence_ratings = []
    title_rating = "moderate"
    for span, share in zip(spans, shares):
        if span.is_title:
            bucket = _bucket_for_length(policy, spans[-1].end)
            pct = _midrank_percentile(bucket, share)
            if pct <= 100.0 / 3.0:
                title_rating = "weak"
            elif pct >= 200.0 / 3.0:
                title_rating = "strong"
            else:
                title_rating = "moderate"
            continue
        z = 0.0 if std == 0.0 else (share - mean) / std
        if z >= policy.z_strong:
            rating = "strong"
        elif z <= policy.z_weak:
            rating = "weak"
        else:
            rating = "moderate"
        if overall in ("strong", "weak"):
            rating = _shift_toward(rating, overall)
        sentence_ratings.append(rating)
    return overall, title_rating, sentence_ratings


@dataclass
class AttributionReport:
    request_id: str
    p: float
    method: str  # "ig" | "occlusion"
    spans: list[SentenceSpan]
    raw_attributions: list[float]
    shares: list[float] | None
    degenerate: bool
    completeness: float | None
    overall_rating: str
    title_rating: str
    sentence_ratings: list[str]

    def ratings_payload(self) -> dict:
        return {
            "overall": self.overall_rating,
            "title": self.title_rating,
            "sentences": list(self.sentence_ratings),
        }


def _attribution_parts(request, scorer, embedder, steps: int):
    """Shared by explain_request and calibrate_policy: spans, raw
    attributions, shares, and method for one request."""
    title, body = request.masked_title, request.masked_body
    spans = segment(title, body)
    combined = combine_title_body(title, body)
    p = scorer.score(title, body)

    use_ig = (
        embedder.has_token_embeddings()
        and scorer.model.encoder_id == getattr(embedder, "name", None)
    )
    if use_ig:
        x = embedder.token_embeddings(combined)
        if x.shape[0] != spans[-1].end:
            warnings.warn(
                "token embedding rows do not align with spans; falling back to occlusion"
            )
            use_ig = False
    if use_ig:
        head = PooledLinearScorer(scorer.model.weights, scorer.model.bias)
        attr = integrated_gradients(head, x, None, steps)
        residual = completeness_residual(head, x, None, attr)
        raw, shares, degenerate = sentence_attributions(attr, spans)
        return p, spans, raw, shares, degenerate, "ig", residual

    # Occlusion: share of each span is the normalized drop in p when the
    # span is removed.
    raw = []
    for i, span in enumerate(spans):
        if span.is_title:
            without = combine_title_body("", body)
        else:
            rest = [s.text for j, s in enumerate(spans) if not s.is_title and j != i]
            without = combine_title_body(title, " ".join(rest))
        raw.append(p - scorer.score_text(without))
    raw, shares, degenerate = _normalize_raw(raw)
    return p, spans, raw, shares, degenerate, "occlusion", None


def explain_request(
    request, scorer, embedder, policy: RatingPolicy, steps: int = 64
) -> AttributionReport:
    p, spans, raw, shares, degenerate, method, residual = _attribution_parts(
        request, scorer, embedder, steps
    )
    overall, title_rating, sentence_ratings = rate(p, shares, spans, policy)
    return AttributionReport(
        request_id=request.id,
        p=p,
        method=method,
        spans=spans,
        raw_attributions=raw,
        shares=shares,
        degenerate=degenerate,
        completeness=residual,
        overall_rating=overall,
        title_rating=title_rating,
        sentence_ratings=sentence_ratings,
    )


def calibrate_policy(
    requests,
    scorer,
    embedder,
    steps: int = 64,
    z_weak: float = -1.0,
    z_strong: float = 1.0,
) -> RatingPolicy:
    """Overall thresholds at the terciles of training p; title reference
    distributions per decile bucket of request token length."""
    if len(requests) < 50:
        raise ValueError(f"need at least 50 requests to calibrate, got {len(requests)}")

    ps, lengths, title_shares = [], [], []
    for r in requests:
        p, spans, _raw, shares, degenerate, _method, _res = _attribution_parts(
            r, scorer, embedder, steps
        )
        ps.append(p)
        if not degenerate and shares is not None:
            lengths.append(spans[-1].end)
            title_shares.append(shares[0])

    weak_max = float(np.percentile(ps, 100.0 / 3.0))
    strong_min = float(np.percentile(ps, 200.0 / 3.0))
    if strong_min <= weak_max:
        strong_min = weak_max + 1e-9

    lengths_arr = np.asarray(lengths, dtype=float)
    shares_arr = np.asarray(title_shares, dtype=float)
    edges = np.quantile(lengths_arr, np.linspace(0.1, 0.9, 9))
    buckets = []
    assignment = np.searchsorted(edges, lengths_arr, side="right")
    for b in range(10):
        buckets.append(np.sort(shares_arr[assignment == b]))
    return RatingPolicy(
        weak_max=weak_max,
        strong_min=strong_min,
        z_weak=z_weak,
        z_strong=z_strong,
        length_edges=edges,
        bucket_shares=buckets,
    )


# ---------------------------------------------------------------------------
# Artifacts


def report_to_dict(report: AttributionReport) -> dict:
    return {
        "id": report.request_id,
        "p": report.p,
        "method": report.method,
        "spans": [
            {"start": s.start, "end": s.end, "is_title": s.is_title, "text": s.text}
            for s in report.spans
        ],
        "raw_attributions": report.raw_attributions,
        "shares": report.shares,
        "degenerate": report.degenerate,
        "completeness_residual": report.completeness,
        "ratings": report.ratings_payload(),
    }


def write_ratings_jsonl(reports: list[AttributionReport], path: str | Path) -> None:
    lines = [json.dumps(report_to_dict(r), sort_keys=True) for r in reports]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_policy(policy: RatingPolicy, path: str | Path) -> None:
    payload = {
        "weak_max": policy.weak_max,
        "strong_min": policy.strong_min,
        "z_weak": policy.z_weak,
        "z_strong": policy.z_strong,
        "length_edges": [float(e) for e in policy.length_edges],
        "bucket_shares": [[float(v) for v in b] for b in policy.bucket_shares],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_policy(path: str | Path) -> RatingPolicy:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return RatingPolicy(
        weak_max=float(raw["weak_max"]),
        strong_min=float(raw["strong_min"]),
        z_weak=float(raw["z_weak"]),
        z_strong=float(raw["z_strong"]),
        length_edges=np.asarray(raw["length_edges"], dtype=float),
        bucket_shares=[np.asarray(b, dtype=float) for b in raw["bucket_shares"]],
    )
