import json

import pytest
from click.testing import CliRunner

from referral_forge.cli import main as cli_main
from referral_forge.corpus import default_lexicon_path, load_lexicon
from referral_forge.features import (
    default_dictionary_path,
    default_schema_path,
    load_dictionary,
    load_schema,
)
from referral_forge.synthetic import generate_corpus, write_comments_jsonl, write_posts_jsonl

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_RESULTS[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_RESULTS:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for name, outcome in _ACCEPTANCE_RESULTS.items():
            status = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"  [{status}] {name}")


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon(default_lexicon_path())


@pytest.fixture(scope="session")
def schema():
    return load_schema(default_schema_path())


@pytest.fixture(scope="session")
def dictionary():
    return load_dictionary(default_dictionary_path())


def make_workspace(root, n_train=150, n_test=50, seed=7, **config_overrides):
    """Synthetic corpus + config file in `root`; returns the config path."""
    posts, comments = generate_corpus(n_train=n_train, n_test=n_test, seed=seed)
    write_posts_jsonl(posts, root / "posts.jsonl")
    write_comments_jsonl(comments, root / "comments.jsonl")
    config = {
        "posts_path": str(root / "posts.jsonl"),
        "comments_path": str(root / "comments.jsonl"),
        "workdir": str(root / "artifacts"),
        "embed_dim": 64,
        "grid_size": 3,
        "cv_folds": 3,
        "bootstrap_b": 200,
        "ig_steps": 8,
        "keep_frac": 0.34,
    }
    config.update(config_overrides)
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    return config_path


def run_cli(config_path, *args):
    runner = CliRunner()
    result = runner.invoke(cli_main, ["--config", str(config_path), *args])
    return result


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """Full pipeline artifacts (ingest, train, evaluate, index) built
    once through the CLI."""
    root = tmp_path_factory.mktemp("pipeline")
    config_path = make_workspace(root)
    for step in (["ingest"], ["train"], ["evaluate"], ["index"]):
        result = run_cli(config_path, *step)
        assert result.exit_code == 0, f"{step} failed: {result.output}"
    return config_path
