"""End-to-end revision workflows and their evaluation: per-request
outcomes, the median-split summary, the Lowess curve, and decile
improvement shares.

The reward model is frozen before any workflow runs; both the original
and the revised text are scored by the same model, and revision deltas
are never fed back into training. Failed revisions are reported
separately, never imputed.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .explainer import RatingPolicy, explain_request
from .improver import (
    PromptBundle,
    RevisionError,
    build_system_prompt,
    build_user_prompt,
    revise,
)
from .retriever import RetrievalIndex, query
from .text import combine_title_body

WORKFLOW_MODES = ("basic", "rag", "rag_no_ratings")


@dataclass(frozen=True)
class RevisionOutcome:
    request_id: str
    workflow: str
    p_before: float
    p_after: float
    delta: float
    improved: bool
    original_title: str
    original_body: str
    revised_title: str
    revised_body: str
    failed: bool = False
    failure_reason: str = ""
    failure_raw: str = ""


@dataclass(frozen=True)
class GroupStats:
    n: int
    mean_p_before: float
    se_p_before: float
    mean_p_after: float
    se_p_after: float
    mean_delta: float
    se_delta: float
    share_improved: float
    se_improved: float


@dataclass(frozen=True)
class WorkflowReport:
    workflow: str
    lower_half: GroupStats
    upper_half: GroupStats
    overall: GroupStats
    n_failed: int


@dataclass(frozen=True)
class LowessCurve:
    x: np.ndarray
    y: np.ndarray
    frac: float


@dataclass
class WorkflowDeps:
    """Frozen artifacts a workflow run needs. The index and policy are
    only required for the RAG modes."""

    scorer: object
    embedder: object
    provider: object
    index: RetrievalIndex | None = None
    policy: RatingPolicy | None = None
    model_id: str = "stub"
    temperature: float = 0.0
    seed: int | None = None
    retrieve_k: int = 5
    ig_steps: int = 64
    validation_retries: int = 2
    prompts_dir: Path | None = None
    lexicon: object = None


def run_workflow(request, mode: str, deps: WorkflowDeps) -> RevisionOutcome:
    """basic: improver only. rag: retrieve, explain, improve.
    rag_no_ratings: retrieve, improve. The evaluator scores both versions
    with the same frozen model. Provider failures mark the outcome failed."""
    if mode not in WORKFLOW_MODES:
        raise ValueError(f"unknown workflow mode {mode!r}")
    p_before = deps.scorer.score(request.masked_title, request.masked_body)

    examples = []
    report = None
    if mode in ("rag", "rag_no_ratings"):
        if deps.index is None:
            raise ValueError("rag workflows require a retrieval index")
        result = query(
            combine_title_body(request.masked_title, request.masked_body),
            deps.index,
            deps.scorer,
            deps.embedder,
            k=deps.retrieve_k,
        )
        examples = [ex.entry for ex in result.examples]
    if mode == "rag":
        if deps.policy is None:
            raise ValueError("rag mode requires a rating policy")
        report = explain_request(
            request, deps.scorer, deps.embedder, deps.policy, steps=deps.ig_steps
        )

    include_ratings = mode == "rag"
    if examples:
        system = build_system_prompt(
            examples, include_ratings=include_ratings, mode="rag", prompts_dir=deps.prompts_dir
        )
    else:
        # No eligible examples (query at or above the pool maximum):
        # degrade to the basic guideline prompt rather than erroring.
        system = build_system_prompt(
            [], include_ratings=include_ratings, mode="basic", prompts_dir=deps.prompts_dir
        )
    user = build_user_prompt(request, report=report, lexicon=deps.lexicon)
    bundle = PromptBundle(
        system=system,
        user=user,
        model_id=deps.model_id,
        temperature=deps.temperature,
        seed=deps.seed,
    )

    try:
        revision = revise(request, deps.provider, bundle, deps.validation_retries)
    except RevisionError as failure:
        return RevisionOutcome(
            request_id=request.id,
            workflow=mode,
            p_before=p_before,
            p_after=p_before,
            delta=0.0,
            improved=False,
            original_title=request.masked_title,
            original_body=request.masked_body,
            revised_title="",
            revised_body="",
            failed=True,
            failure_reason=failure.reason,
            failure_raw=failure.raw,
        )

    p_after = deps.scorer.score(revision.title, revision.content)
    delta = p_after - p_before
    return RevisionOutcome(
        request_id=request.id,
        workflow=mode,
        p_before=p_before,
        p_after=p_after,
        delta=delta,
        improved=delta > 0,
        original_title=request.masked_title,
        original_body=request.masked_body,
        revised_title=revision.title,
        revised_body=revision.content,
    )


def _group_stats(outcomes: list[RevisionOutcome]) -> GroupStats:
    n = len(outcomes)
    if n == 0:
        return GroupStats(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    pb = np.array([o.p_before for o in outcomes])
    pa = np.array([o.p_after for o in outcomes])
    dd = np.array([o.delta for o in outcomes])
    imp = np.array([1.0 if o.improved else 0.0 for o in outcomes])

    def se(values):
        if len(values) < 2:
            return 0.0
        return float(np.std(values, ddof=1) / math.sqrt(len(values)))

    return GroupStats(
        n=n,
        mean_p_before=float(pb.mean()),
        se_p_before=se(pb),
        mean_p_after=float(pa.mean()),
        se_p_after=se(pa),
        mean_delta=float(dd.mean()),
        se_delta=se(dd),
        share_improved=float(imp.mean()),
        se_improved=se(imp),
    )


def summarize(outcomes: list[RevisionOutcome]) -> WorkflowReport:
    """Median split on pre-revision p (ties go to the lower half), with
    means, sd/sqrt(n) standard errors, and the share of strict
    improvements per group. Failed outcomes are excluded and counted."""
    ok = [o for o in outcomes if not o.failed]
    n_failed = len(outcomes) - len(ok)
    if len(ok) < 2:
        raise ValueError("need at least 2 successful outcomes to summarize")
    median = float(np.median([o.p_before for o in ok]))
    lower = [o for o in ok if o.p_before <= median]
    upper = [o for o in ok if o.p_before > median]
    workflow = ok[0].workflow
    return WorkflowReport(
        workflow=workflow,
        lower_half=_group_stats(lower),
        upper_half=_group_stats(upper),
        overall=_group_stats(ok),
        n_failed=n_failed,
    )


def lowess(x, y, frac: float = 0.3) -> LowessCurve:
    """Locally weighted linear regression with tricube weights over the
    frac-nearest neighbors, evaluated at the sorted unique x values.
    Degenerate windows (all x equal) fall back to the local mean."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 5:
        raise ValueError("need at least 5 points")
    if not 0.0 < frac <= 1.0:
        raise ValueError("frac must be in (0, 1]")

    xs = np.unique(x)
    n = len(x)
    r = max(2, int(math.ceil(frac * n)))
    smoothed = np.empty(len(xs))
    for i, x0 in enumerate(xs):
        dist = np.abs(x - x0)
        h = np.sort(dist)[min(r, n) - 1]
        if h <= 0.0:
            smoothed[i] = float(np.mean(y[dist == 0.0]))
            continue
        w = np.clip(dist / h, 0.0, 1.0)
        w = (1.0 - w**3) ** 3
        sw = w.sum()
        xm = float((w * x).sum() / sw)
        ym = float((w * y).sum() / sw)
        sxx = float((w * (x - xm) ** 2).sum())
        if sxx <= 1e-12:
            smoothed[i] = ym
            continue
        slope = float((w * (x - xm) * (y - ym)).sum()) / sxx
        smoothed[i] = ym + slope * (x0 - xm)
    return LowessCurve(x=xs, y=smoothed, frac=frac)


def decile_improvement(outcomes: list[RevisionOutcome]) -> list[dict]:
    """Per-decile (of pre-revision p) share of strictly improved
    requests. Decile counts sum to the number of successful outcomes."""
    ok = [o for o in outcomes if not o.failed]
    if len(ok) < 10:
        raise ValueError("need at least 10 outcomes")
    pb = np.array([o.p_before for o in ok])
    imp = np.array([1.0 if o.improved else 0.0 for o in ok])
    edges = np.quantile(pb, np.linspace(0.1, 0.9, 9))
    assignment = np.searchsorted(edges, pb, side="right")
    rows = []
    for d in range(10):
        mask = assignment == d
        count = int(mask.sum())
        share = float(imp[mask].mean()) if count else None
        rows.append({"decile": d + 1, "count": count, "share_improved": share})
    return rows


# ---------------------------------------------------------------------------
# Artifacts


def write_outcomes_jsonl(outcomes: list[RevisionOutcome], path: str | Path) -> None:
    lines = []
    for o in outcomes:
        lines.append(
            json.dumps(
                {
                    "id": o.request_id,
                    "workflow": o.workflow,
                    "p_before": o.p_before,
                    "p_after": o.p_after,
                    "delta": o.delta,
                    "improved": o.improved,
                    "original_title": o.original_title,
                    "original_body": o.original_body,
                    "revised_title": o.revised_title,
                    "revised_body": o.revised_body,
                    "failed": o.failed,
                    "failure_reason": o.failure_reason,
                    "failure_raw": o.failure_raw,
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _group_dict(g: GroupStats) -> dict:
    return {
        "n": g.n,
        "p_before": {"mean": g.mean_p_before, "se": g.se_p_before},
        "p_after": {"mean": g.mean_p_after, "se": g.se_p_after},
        "delta": {"mean": g.mean_delta, "se": g.se_delta},
        "improved": {"share": g.share_improved, "se": g.se_improved},
    }


def write_workflow_report(report: WorkflowReport, path: str | Path) -> None:
    payload = {
        "workflow": report.workflow,
        "n_failed": report.n_failed,
        "groups": {
            "lower_half": _group_dict(report.lower_half),
            "upper_half": _group_dict(report.upper_half),
            "overall": _group_dict(report.overall),
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_lowess_csv(curve: LowessCurve, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["p_before", "smoothed_p_after"])
        for xv, yv in zip(curve.x, curve.y):
            writer.writerow([repr(float(xv)), repr(float(yv))])


def write_deciles_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["decile", "count", "share_improved"])
        for row in rows:
            share = "" if row["share_improved"] is None else repr(row["share_improved"])
            writer.writerow([row["decile"], row["count"], share])
