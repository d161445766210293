"""Application configuration and artifact wiring.

One human-editable JSON file holds paths, provider endpoints, seeds, and
thresholds; every CLI flag overrides its config key, and the
REFERRAL_FORGE_CONFIG environment variable points at the file. All
randomness in the pipeline flows from the seeds recorded here, so two
runs with an identical config produce identical artifacts.
"""

import dataclasses
import datetime as dt
import json
import os
from dataclasses import dataclass
from pathlib import Path

from . import corpus, encoders, features, improver
from .embedders import HashingEmbedder, HttpEmbeddingClient
from .encoders import TfidfConfig, load_stopwords, load_vocab, transform_dense
from .improver import (
    EchoProvider,
    HttpCompletionProvider,
    ScriptedProvider,
    TopExampleProvider,
)
from .model import RequestScorer, load_model

ENV_CONFIG_VAR = "REFERRAL_FORGE_CONFIG"

ARTIFACT_NAMES = (
    "requests.jsonl",
    "split.json",
    "model.json",
    "tfidf_vocab.json",
    "cv_report.json",
    "metrics_report.json",
    "calibration.csv",
    "prob_stats.json",
    "index.bin",
    "index_meta.json",
    "policy.json",
    "ratings.jsonl",
    "outcomes.jsonl",
    "workflow_report.json",
    "lowess.csv",
    "deciles.csv",
)


@dataclass
class AppConfig:
    # inputs
    posts_path: str = "posts.jsonl"
    comments_path: str = "comments.jsonl"
    lexicon_path: str = ""  # empty -> packaged default
    schema_path: str = ""
    dictionary_path: str = ""
    stopwords_path: str = ""
    prompts_dir: str = ""
    workdir: str = "artifacts"

    # encoder
    encoder: str = "hash"  # "hash" | "tfidf"
    embed_dim: int = 256
    min_df: int = 1

    # providers
    completion_provider: str = "stub-echo"  # stub-echo | stub-top-example | http
    completion_endpoint: str = ""
    completion_model_id: str = "gpt-5-mini"
    temperature: float = 0.0
    completion_seed: int | None = None
    embedding_provider: str = "hash"  # hash | http
    embedding_endpoint: str = ""
    max_in_flight: int = 4

    # seeds
    seed_cv: int = 7
    seed_index: int = 13
    seed_bootstrap: int = 11
    seed_baseline: int = 17

    # thresholds
    threshold_date: str = "2024-09-24"
    cv_folds: int = 5
    grid_size: int = 12
    bootstrap_b: int = 1000
    alpha: float = 0.05
    classification_threshold: float = 0.5
    calibration_bins: int = 10
    trim_frac: float = 0.03
    keep_frac: float = 0.10
    retrieve_k: int = 5
    ig_steps: int = 64
    lowess_frac: float = 0.3
    validation_retries: int = 2
    transport_retries: int = 3

    # server
    host: str = "127.0.0.1"
    port: int = 8321
    ui_dist: str = ""

    def artifact(self, name: str) -> Path:
        return Path(self.workdir) / name

    def resolved_lexicon_path(self) -> Path:
        return Path(self.lexicon_path) if self.lexicon_path else corpus.default_lexicon_path()

    def resolved_schema_path(self) -> Path:
        return Path(self.schema_path) if self.schema_path else features.default_schema_path()

    def resolved_dictionary_path(self) -> Path:
        return Path(self.dictionary_path) if self.dictionary_path else features.default_dictionary_path()

    def resolved_stopwords_path(self) -> Path:
        return Path(self.stopwords_path) if self.stopwords_path else encoders.default_stopwords_path()

    def resolved_prompts_dir(self) -> Path:
        return Path(self.prompts_dir) if self.prompts_dir else improver.default_prompts_dir()

    def parsed_threshold_date(self) -> dt.date:
        return dt.date.fromisoformat(self.threshold_date)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> AppConfig:
    """Config resolution order: defaults < file < explicit overrides.
    When no path is given, REFERRAL_FORGE_CONFIG is consulted."""
    values: dict = {}
    if path is None:
        path = os.environ.get(ENV_CONFIG_VAR)
    if path:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in dataclasses.fields(AppConfig)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return AppConfig(**values)


def save_config(config: AppConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(dataclasses.asdict(config), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def validate_startup_paths(config: AppConfig, require_index: bool = False) -> None:
    """Fail fast when referenced artifacts are missing."""
    required = [
        config.resolved_lexicon_path(),
        config.resolved_schema_path(),
        config.resolved_dictionary_path(),
        config.resolved_stopwords_path(),
        config.resolved_prompts_dir(),
        config.artifact("model.json"),
    ]
    if require_index:
        required.append(config.artifact("index.bin"))
    missing = [str(p) for p in required if not Path(p).exists()]
    if missing:
        raise FileNotFoundError(f"missing required artifacts: {missing}")


def build_embedder(config: AppConfig):
    if config.embedding_provider == "hash":
        return HashingEmbedder(dimension=config.embed_dim)
    if config.embedding_provider == "http":
        if not config.embedding_endpoint:
            raise ValueError("embedding_provider=http requires embedding_endpoint")
        return HttpEmbeddingClient(
            base_url=config.embedding_endpoint,
            dimension=config.embed_dim,
            max_in_flight=config.max_in_flight,
            retries=config.transport_retries,
        )
    raise ValueError(f"unknown embedding provider {config.embedding_provider!r}")


def build_completion_provider(config: AppConfig, scripted_outputs: list[str] | None = None):
    kind = config.completion_provider
    if kind == "stub-echo":
        return EchoProvider()
    if kind == "stub-top-example":
        return TopExampleProvider()
    if kind == "stub-scripted":
        return ScriptedProvider(scripted_outputs or ["not json"])
    if kind == "http":
        if not config.completion_endpoint:
            raise ValueError("completion_provider=http requires completion_endpoint")
        return HttpCompletionProvider(
            base_url=config.completion_endpoint,
            retries=config.transport_retries,
            max_in_flight=config.max_in_flight,
        )
    raise ValueError(f"unknown completion provider {kind!r}")


def build_encode_fn(config: AppConfig, embedder):
    """Text -> feature vector for the configured encoder."""
    if config.encoder == "hash":
        return lambda text: embedder.embed(text).values
    if config.encoder == "tfidf":
        vocab_path = config.artifact("tfidf_vocab.json")
        if not vocab_path.exists():
            raise FileNotFoundError(f"missing TF-IDF vocabulary artifact: {vocab_path}")
        vocab = load_vocab(vocab_path)
        tf_config = TfidfConfig(
            stopwords=load_stopwords(config.resolved_stopwords_path()),
            min_df=config.min_df,
        )
        return lambda text: transform_dense(text, vocab, tf_config)
    if config.encoder == "featurized":
        import numpy as np

        from .features import (
            extract_semantic,
            linguistic_properties,
            load_dictionary,
            load_schema,
        )

        schema = load_schema(config.resolved_schema_path())
        dictionary = load_dictionary(config.resolved_dictionary_path())

        def encode(text: str):
            flags = extract_semantic(text, schema)
            stats = linguistic_properties(text, dictionary)
            return np.array(
                list(flags.values())
                + [
                    stats.type_token_ratio,
                    float(stats.word_count),
                    stats.readability_score,
                    float(stats.spelling_errors),
                ],
                dtype=float,
            )

        return encode
    raise ValueError(f"unknown encoder {config.encoder!r}")


def build_scorer(config: AppConfig, embedder) -> RequestScorer:
    model_path = config.artifact("model.json")
    if not model_path.exists():
        raise FileNotFoundError(f"missing model artifact: {model_path}")
    model = load_model(model_path)
    return RequestScorer(model=model, encode=build_encode_fn(config, embedder))
