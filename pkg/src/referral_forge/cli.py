"""Command-line pipeline: ingest -> train -> evaluate -> index ->
explain/revise/batch-eval -> serve.

Every subcommand reads the JSON config (path from --config or the
REFERRAL_FORGE_CONFIG environment variable), applies flag overrides, and
writes file artifacts into the configured workdir. Runs are deterministic
under fixed seeds: identical configs produce byte-identical artifacts.
"""

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import (
    AppConfig,
    build_completion_provider,
    build_embedder,
    build_encode_fn,
    build_scorer,
    load_config,
)
from .corpus import (
    label_and_assemble,
    load_lexicon,
    read_comments_jsonl,
    read_posts_jsonl,
    read_requests_jsonl,
    read_split_json,
    split_by_date,
    write_requests_jsonl,
    write_split_json,
)
from .encoders import TfidfConfig, fit_tfidf, load_stopwords, save_vocab
from .explainer import (
    calibrate_policy,
    explain_request,
    load_policy,
    report_to_dict,
    save_policy,
    write_ratings_jsonl,
)
from .metrics import (
    calibration_bins,
    distribution_stats,
    evaluate_scores,
    random_baseline,
    write_calibration_csv,
    write_metrics_report,
    write_prob_stats,
)
from .model import (
    default_lambda_grid,
    grid_search_cv,
    save_model,
    train_l1,
)
from .retriever import attach_ratings, build_index, load_index, save_index
from .synthetic import generate_corpus, write_comments_jsonl, write_posts_jsonl
from .text import combine_title_body
from .workflow import (
    WorkflowDeps,
    decile_improvement,
    lowess,
    run_workflow,
    summarize,
    write_deciles_csv,
    write_lowess_csv,
    write_outcomes_jsonl,
    write_workflow_report,
)


def _require(path: Path, what: str) -> Path:
    if not Path(path).exists():
        raise click.ClickException(f"missing {what}: {path} (run the producing subcommand first)")
    return Path(path)


def _load_requests_and_split(config: AppConfig):
    requests = read_requests_jsonl(_require(config.artifact("requests.jsonl"), "requests artifact"))
    split = read_split_json(_require(config.artifact("split.json"), "split artifact"))
    by_id = {r.id: r for r in requests}
    train = [by_id[i] for i in split.train_ids]
    test = [by_id[i] for i in split.test_ids]
    return requests, split, train, test


def _texts(requests):
    return [combine_title_body(r.masked_title, r.masked_body) for r in requests]


@click.group()
@click.option("--config", "config_path", default=None, help="Path to the JSON config file.")
@click.version_option(__version__)
@click.pass_context
def main(ctx, config_path):
    """Referral-request quality scoring and revision pipeline."""
    ctx.obj = config_path


def _config(ctx, **overrides) -> AppConfig:
    try:
        return load_config(ctx.obj, overrides)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        raise click.ClickException(str(exc))


@main.command("demo-corpus")
@click.option("--out-dir", default=".", show_default=True)
@click.option("--n-train", default=400, show_default=True)
@click.option("--n-test", default=100, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--positive-rate", default=0.462, show_default=True)
@click.pass_context
def demo_corpus(ctx, out_dir, n_train, n_test, seed, positive_rate):
    """Write a synthetic posts/comments corpus for trying the pipeline."""
    config = _config(ctx)
    posts, comments = generate_corpus(
        n_train=n_train,
        n_test=n_test,
        seed=seed,
        positive_rate=positive_rate,
        threshold_date=config.parsed_threshold_date(),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_posts_jsonl(posts, out / "posts.jsonl")
    write_comments_jsonl(comments, out / "comments.jsonl")
    click.echo(f"wrote {len(posts)} posts and {len(comments)} comments to {out}")


@main.command()
@click.option("--posts", "posts_path", default=None, help="Override posts.jsonl path.")
@click.option("--comments", "comments_path", default=None, help="Override comments.jsonl path.")
@click.option("--threshold-date", default=None, help="Train/test date threshold (ISO).")
@click.pass_context
def ingest(ctx, posts_path, comments_path, threshold_date):
    """Identify, mask, and label referral requests; split by date."""
    config = _config(
        ctx, posts_path=posts_path, comments_path=comments_path, threshold_date=threshold_date
    )
    lexicon = load_lexicon(_require(config.resolved_lexicon_path(), "lexicon"))
    posts = read_posts_jsonl(_require(Path(config.posts_path), "posts input"))
    comments = read_comments_jsonl(_require(Path(config.comments_path), "comments input"))

    requests = label_and_assemble(posts, comments, lexicon)
    if not requests:
        raise click.ClickException("no referral requests identified in the corpus")
    split = split_by_date(requests, config.parsed_threshold_date())

    Path(config.workdir).mkdir(parents=True, exist_ok=True)
    write_requests_jsonl(requests, config.artifact("requests.jsonl"))
    write_split_json(split, config.artifact("split.json"))
    click.echo(
        f"{len(requests)} requests ({len(split.train_ids)} train / {len(split.test_ids)} test), "
        f"train base rate {split.train_base_rate:.3f}"
    )


@main.command()
@click.option("--encoder", default=None, type=click.Choice(["hash", "tfidf", "featurized"]))
@click.pass_context
def train(ctx, encoder):
    """Fit the encoder and the L1 logistic head with CV-selected penalty."""
    config = _config(ctx, encoder=encoder)
    _requests, _split, train_requests, _test = _load_requests_and_split(config)
    embedder = build_embedder(config)

    texts = _texts(train_requests)
    y = np.array([1.0 if r.label else 0.0 for r in train_requests])

    if config.encoder == "tfidf":
        tf_config = TfidfConfig(
            stopwords=load_stopwords(config.resolved_stopwords_path()), min_df=config.min_df
        )
        vocab = fit_tfidf(texts, tf_config)
        save_vocab(vocab, config.artifact("tfidf_vocab.json"))
        encoder_id = "tfidf-v1"
    elif config.encoder == "featurized":
        from .features import load_schema

        encoder_id = f"featurized-{load_schema(config.resolved_schema_path()).version}"
    else:
        encoder_id = embedder.name

    encode = build_encode_fn(config, embedder)
    X = np.stack([encode(t) for t in texts])

    grid = default_lambda_grid(X, y, size=config.grid_size)
    report = grid_search_cv(X, y, grid, k=config.cv_folds, seed=config.seed_cv)
    model = train_l1(X, y, report.selected_lambda, encoder_id=encoder_id)

    save_model(model, config.artifact("model.json"))
    cv_payload = {
        "grid": [float(g) for g in report.grid],
        "fold_scores": [
            [None if np.isnan(v) else float(v) for v in row] for row in report.fold_scores
        ],
        "mean_scores": [None if np.isnan(v) else float(v) for v in report.mean_scores],
        "selected_lambda": report.selected_lambda,
    }
    config.artifact("cv_report.json").write_text(
        json.dumps(cv_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    nnz = int(np.sum(model.weights != 0))
    click.echo(f"selected lambda {report.selected_lambda:.6g}, {nnz} nonzero weights")


@main.command()
@click.pass_context
def evaluate(ctx):
    """Test-split metrics with bootstrap CIs, calibration bins, and the
    predicted-probability distribution."""
    config = _config(ctx)
    _requests, split, _train, test_requests = _load_requests_and_split(config)
    embedder = build_embedder(config)
    scorer = _scorer_or_fail(config, embedder)

    scores = np.array([scorer.score(r.masked_title, r.masked_body) for r in test_requests])
    labels = np.array([1.0 if r.label else 0.0 for r in test_requests])

    baseline = random_baseline(
        labels, rate=split.train_base_rate, seed=config.seed_baseline, B=config.bootstrap_b,
        alpha=config.alpha,
    )
    model_report = evaluate_scores(
        scores,
        labels,
        name=f"{config.encoder} + l1-logistic",
        threshold=config.classification_threshold,
        B=config.bootstrap_b,
        alpha=config.alpha,
        seed=config.seed_bootstrap,
    )
    write_metrics_report([baseline, model_report], config.artifact("metrics_report.json"))
    write_calibration_csv(
        calibration_bins(scores, labels, config.calibration_bins),
        config.artifact("calibration.csv"),
    )
    write_prob_stats(distribution_stats(scores), config.artifact("prob_stats.json"))
    click.echo(
        f"AUROC {model_report.auroc.value:.3f} "
        f"({model_report.auroc.ci_low:.3f}-{model_report.auroc.ci_high:.3f}) on {len(test_requests)} test requests"
    )


def _scorer_or_fail(config, embedder):
    try:
        return build_scorer(config, embedder)
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc))


@main.command("index")
@click.pass_context
def index_cmd(ctx):
    """Build the exemplar retrieval index, calibrate the rating policy,
    and attach explainer ratings to indexed entries."""
    config = _config(ctx)
    _requests, _split, train_requests, _test = _load_requests_and_split(config)
    embedder = build_embedder(config)
    scorer = _scorer_or_fail(config, embedder)

    index = build_index(
        train_requests,
        scorer,
        embedder,
        trim_frac=config.trim_frac,
        keep_frac=config.keep_frac,
        seed=config.seed_index,
    )
    policy = calibrate_policy(train_requests, scorer, embedder, steps=config.ig_steps)
    save_policy(policy, config.artifact("policy.json"))

    by_id = {r.id: r for r in train_requests}
    reports = [
        explain_request(by_id[e.id], scorer, embedder, policy, steps=config.ig_steps)
        for e in index.entries
    ]
    write_ratings_jsonl(reports, config.artifact("ratings.jsonl"))
    index = attach_ratings(index, {r.request_id: r.ratings_payload() for r in reports})
    save_index(index, config.artifact("index.bin"), config.artifact("index_meta.json"))
    click.echo(
        f"indexed {len(index.entries)} exemplars in {index.n_clusters} clusters "
        f"(p_max {index.p_max:.3f})"
    )


@main.command()
@click.option("--id", "request_id", default=None, help="Explain a request from requests.jsonl.")
@click.option("--title", default=None)
@click.option("--body", default=None)
@click.pass_context
def explain(ctx, request_id, title, body):
    """Sentence-level attribution shares and ratings for one request."""
    config = _config(ctx)
    embedder = build_embedder(config)
    scorer = _scorer_or_fail(config, embedder)
    policy = load_policy(_require(config.artifact("policy.json"), "rating policy artifact"))
    request = _resolve_request(config, request_id, title, body)
    report = explain_request(request, scorer, embedder, policy, steps=config.ig_steps)
    click.echo(json.dumps(report_to_dict(report), indent=2, sort_keys=True))


def _resolve_request(config, request_id, title, body):
    from .corpus import ReferralRequest, mask_credentials
    import datetime as dt

    if request_id is not None:
        requests = read_requests_jsonl(_require(config.artifact("requests.jsonl"), "requests artifact"))
        for r in requests:
            if r.id == request_id:
                return r
        raise click.ClickException(f"request id {request_id!r} not found")
    if title is None or body is None:
        raise click.ClickException("provide --id or both --title and --body")
    lexicon = load_lexicon(config.resolved_lexicon_path())
    return ReferralRequest(
        id="adhoc",
        date=dt.date.today(),
        masked_title=mask_credentials(title, lexicon),
        masked_body=mask_credentials(body, lexicon),
        label=False,
    )


def _workflow_deps(config, mode, provider=None):
    embedder = build_embedder(config)
    scorer = _scorer_or_fail(config, embedder)
    index = None
    policy = None
    if mode in ("rag", "rag_no_ratings"):
        index = load_index(
            _require(config.artifact("index.bin"), "retrieval index artifact"),
            embedder_name=embedder.name,
        )
    if mode == "rag":
        policy = load_policy(_require(config.artifact("policy.json"), "rating policy artifact"))
    lexicon = load_lexicon(config.resolved_lexicon_path())
    return WorkflowDeps(
        scorer=scorer,
        embedder=embedder,
        provider=provider or build_completion_provider(config),
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


@main.command()
@click.option("--id", "request_id", default=None)
@click.option("--title", default=None)
@click.option("--body", default=None)
@click.option("--mode", default="basic", type=click.Choice(["basic", "rag", "rag_no_ratings"]))
@click.option("--provider", "provider_kind", default=None, help="Override completion provider.")
@click.pass_context
def revise(ctx, request_id, title, body, mode, provider_kind):
    """Run one revision workflow on a request and print the outcome."""
    config = _config(ctx, completion_provider=provider_kind)
    deps = _workflow_deps(config, mode)
    request = _resolve_request(config, request_id, title, body)
    outcome = run_workflow(request, mode, deps)
    click.echo(
        json.dumps(
            {
                "id": outcome.request_id,
                "workflow": outcome.workflow,
                "p_before": outcome.p_before,
                "p_after": outcome.p_after,
                "delta": outcome.delta,
                "improved": outcome.improved,
                "revised_title": outcome.revised_title,
                "revised_body": outcome.revised_body,
                "failed": outcome.failed,
                "failure_reason": outcome.failure_reason,
            },
            indent=2,
            sort_keys=True,
        )
    )
    if outcome.failed:
        sys.exit(1)


@main.command("batch-eval")
@click.option("--mode", default="rag", type=click.Choice(["basic", "rag", "rag_no_ratings"]))
@click.option("--provider", "provider_kind", default=None, help="Override completion provider.")
@click.option("--limit", default=None, type=int, help="Evaluate only the first N test requests.")
@click.pass_context
def batch_eval(ctx, mode, provider_kind, limit):
    """Run a workflow over the test split and write the revision-impact
    report, Lowess curve, and decile shares."""
    config = _config(ctx, completion_provider=provider_kind)
    _requests, _split, _train, test_requests = _load_requests_and_split(config)
    deps = _workflow_deps(config, mode)

    test_requests = sorted(test_requests, key=lambda r: r.id)
    if limit is not None:
        test_requests = test_requests[:limit]
    outcomes = [run_workflow(r, mode, deps) for r in test_requests]

    write_outcomes_jsonl(outcomes, config.artifact("outcomes.jsonl"))
    report = summarize(outcomes)
    write_workflow_report(report, config.artifact("workflow_report.json"))

    ok = [o for o in outcomes if not o.failed]
    curve = lowess(
        [o.p_before for o in ok], [o.p_after for o in ok], frac=config.lowess_frac
    )
    write_lowess_csv(curve, config.artifact("lowess.csv"))
    write_deciles_csv(decile_improvement(outcomes), config.artifact("deciles.csv"))
    click.echo(
        f"{mode}: lower-half mean delta {report.lower_half.mean_delta:+.4f}, "
        f"share improved {report.lower_half.share_improved:.2f} "
        f"({report.n_failed} failed)"
    )


@main.command()
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.pass_context
def serve(ctx, host, port):
    """Start the HTTP service over the trained artifacts."""
    import uvicorn

    from .service import create_app

    config = _config(ctx, host=host, port=port)
    try:
        app = create_app(config)
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc))
    uvicorn.run(app, host=config.host, port=config.port)


if __name__ == "__main__":
    main()
