"""HTTP service: a thin shell over the library.

Every endpoint masks the incoming draft text (idempotent for already
masked text) and then delegates to the corresponding library call over
immutable shared artifacts; two requests never share mutable state.
Errors map to one machine code each, with a retryable flag.
"""

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import __version__
from .config import (
    AppConfig,
    build_completion_provider,
    build_embedder,
    build_scorer,
    validate_startup_paths,
)
from .corpus import ReferralRequest, load_lexicon, mask_credentials
from .explainer import explain_request, load_policy, report_to_dict
from .improver import RevisionError
from .model import MODEL_FORMAT_VERSION
from .retriever import load_index, query
from .text import combine_title_body
from .workflow import (
    WorkflowDeps,
    decile_improvement,
    run_workflow,
    summarize,
)

import datetime as dt


class DraftPayload(BaseModel):
    title: str = ""
    body: str = ""


class RetrievePayload(DraftPayload):
    k: int = Field(default=5, ge=1, le=25)


class RevisePayload(DraftPayload):
    mode: str = "basic"
    include_ratings: bool = True


class BatchRequestItem(BaseModel):
    id: str
    title: str
    body: str


class BatchEvalPayload(BaseModel):
    requests: list[BatchRequestItem]
    mode: str = "basic"


def _api_error(status: int, code: str, message: str, retryable: bool = False):
    return HTTPException(
        status_code=status,
        detail={"code": code, "message": message, "retryable": retryable},
    )


def _effective_mode(mode: str, include_ratings: bool) -> str:
    if mode == "rag" and not include_ratings:
        return "rag_no_ratings"
    return mode


def create_app(config: AppConfig) -> FastAPI:
    """Load artifacts once (fail fast on missing files; the index and
    policy stay optional) and expose the scoring/explain/retrieve/revise
    endpoints."""
    validate_startup_paths(config)
    embedder = build_embedder(config)
    scorer = build_scorer(config, embedder)
    lexicon = load_lexicon(config.resolved_lexicon_path())
    provider = build_completion_provider(config)

    index = None
    if config.artifact("index.bin").exists():
        index = load_index(config.artifact("index.bin"), embedder_name=embedder.name)
    policy = None
    if config.artifact("policy.json").exists():
        policy = load_policy(config.artifact("policy.json"))

    app = FastAPI(title="referral-forge", version=__version__)

    def masked_request(title: str, body: str, request_id: str = "draft") -> ReferralRequest:
        if not title.strip() and not body.strip():
            raise _api_error(422, "empty_draft", "title and body are both empty")
        return ReferralRequest(
            id=request_id,
            date=dt.date(1970, 1, 1),
            masked_title=mask_credentials(title, lexicon),
            masked_body=mask_credentials(body, lexicon),
            label=False,
        )

    def deps_for(mode: str) -> WorkflowDeps:
        if mode in ("rag", "rag_no_ratings") and index is None:
            raise _api_error(409, "index_missing", "retrieval index not loaded")
        if mode == "rag" and policy is None:
            raise _api_error(409, "policy_missing", "rating policy not loaded")
        return WorkflowDeps(
            scorer=scorer,
            embedder=embedder,
            provider=provider,
            index=index,
            policy=policy,
            model_id=config.completion_model_id,
            temperature=config.temperature,
            seed=config.completion_seed,
            retrieve_k=config.retrieve_k,
            ig_steps=config.ig_steps,
            validation_retries=config.validation_retries,
            prompts_dir=config.resolved_prompts_dir(),
            lexicon=lexicon,
        )

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "versions": {
                "package": __version__,
                "model_format": MODEL_FORMAT_VERSION,
                "encoder_id": scorer.model.encoder_id,
                "index_entries": len(index.entries) if index is not None else None,
                "policy_loaded": policy is not None,
            },
        }

    @app.post("/score")
    def score(payload: DraftPayload):
        request = masked_request(payload.title, payload.body)
        p = scorer.score(request.masked_title, request.masked_body)
        return {"p": p, "masked_title": request.masked_title, "masked_body": request.masked_body}

    @app.post("/explain")
    def explain(payload: DraftPayload):
        if policy is None:
            raise _api_error(409, "policy_missing", "rating policy not loaded")
        request = masked_request(payload.title, payload.body)
        report = explain_request(request, scorer, embedder, policy, steps=config.ig_steps)
        return report_to_dict(report)

    @app.post("/retrieve")
    def retrieve(payload: RetrievePayload):
        if index is None:
            raise _api_error(409, "index_missing", "retrieval index not loaded")
        request = masked_request(payload.title, payload.body)
        result = query(
            combine_title_body(request.masked_title, request.masked_body),
            index,
            scorer,
            embedder,
            k=payload.k,
        )
        return {
            "query_p": result.query_p,
            "threshold": result.threshold,
            "underfilled": result.underfilled,
            "examples": [
                {
                    "id": ex.entry.id,
                    "p": ex.entry.p,
                    "similarity": ex.similarity,
                    "title": ex.entry.masked_title,
                    "body": ex.entry.masked_body,
                    "ratings": ex.entry.ratings,
                }
                for ex in result.examples
            ],
        }

    @app.post("/revise")
    def revise_endpoint(
        payload: RevisePayload,
        mode: str | None = Query(default=None),
        include_ratings: bool | None = Query(default=None),
    ):
        effective = _effective_mode(
            mode if mode is not None else payload.mode,
            include_ratings if include_ratings is not None else payload.include_ratings,
        )
        if effective not in ("basic", "rag", "rag_no_ratings"):
            raise _api_error(422, "unknown_mode", f"unknown workflow mode {effective!r}")
        deps = deps_for(effective)
        request = masked_request(payload.title, payload.body)
        try:
            outcome = run_workflow(request, effective, deps)
        except RevisionError as failure:
            raise _api_error(422, "revision_failed", failure.reason)
        if outcome.failed:
            return {
                "failed": True,
                "code": "parse_failure",
                "failure_reason": outcome.failure_reason,
                "raw": outcome.failure_raw,
                "p_before": outcome.p_before,
                "workflow": outcome.workflow,
            }
        return {
            "failed": False,
            "workflow": outcome.workflow,
            "p_before": outcome.p_before,
            "p_after": outcome.p_after,
            "delta": outcome.delta,
            "improved": outcome.improved,
            "original_title": outcome.original_title,
            "original_body": outcome.original_body,
            "revised_title": outcome.revised_title,
            "revised_body": outcome.revised_body,
        }

    @app.post("/batch-eval")
    def batch_eval_endpoint(payload: BatchEvalPayload):
        if payload.mode not in ("basic", "rag", "rag_no_ratings"):
            raise _api_error(422, "unknown_mode", f"unknown workflow mode {payload.mode!r}")
        deps = deps_for(payload.mode)
        outcomes = [
            run_workflow(masked_request(item.title, item.body, item.id), payload.mode, deps)
            for item in payload.requests
        ]
        if sum(1 for o in outcomes if not o.failed) < 2:
            raise _api_error(422, "too_few_outcomes", "need at least 2 successful outcomes")
        report = summarize(outcomes)
        response = {
            "workflow": report.workflow,
            "n_failed": report.n_failed,
            "groups": {
                "lower_half": _group_payload(report.lower_half),
                "upper_half": _group_payload(report.upper_half),
                "overall": _group_payload(report.overall),
            },
        }
        ok = [o for o in outcomes if not o.failed]
        if len(ok) >= 10:
            response["deciles"] = decile_improvement(outcomes)
        return response

    ui_dist = Path(config.ui_dist) if config.ui_dist else None
    if ui_dist and ui_dist.exists():
        app.mount("/ui", StaticFiles(directory=str(ui_dist), html=True), name="ui")

    return app


def _group_payload(g):
    return {
        "n": g.n,
        "p_before": {"mean": g.mean_p_before, "se": g.se_p_before},
        "p_after": {"mean": g.mean_p_after, "se": g.se_p_after},
        "delta": {"mean": g.mean_delta, "se": g.se_delta},
        "improved": {"share": g.share_improved, "se": g.se_improved},
    }
