"""Prompt assembly, completion providers, and revision parsing.

System prompts come from versioned plain-text templates; RAG mode appends
retrieved example blocks (with or without explainer ratings — the
exclude-ratings ablation). The user prompt is a structured payload with
the masked title, content, and optional ratings. Provider output must be
exactly one fenced JSON object; the revision is validated against the
mask vocabulary and against newly introduced credential-shaped digits
before it is accepted, with a bounded retry budget.
"""

import json
import re
import threading
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import httpx

from .corpus import mask_credentials
from .text import MASK_VOCABULARY, foreign_bracket_tokens

PROMPT_VERSION = "v1"
MAX_EXAMPLES = 5


def default_prompts_dir() -> Path:
    return Path(__file__).parent / "data" / "prompts"


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: dict
    model_id: str
    temperature: float = 0.0
    seed: int | None = None


@dataclass(frozen=True)
class Revision:
    title: str
    content: str
    latency: float = 0.0
    prompt_tokens: int = 0
    completion_tokens: int = 0


class RevisionError(Exception):
    def __init__(self, reason: str, raw: str):
        super().__init__(reason)
        self.reason = reason
        self.raw = raw


class ParseFailure(RevisionError):
    pass


class ValidationFailure(RevisionError):
    pass


class TransportFailure(RevisionError):
    pass


def _load_template(prompts_dir: Path, name: str) -> str:
    return (prompts_dir / f"{name}_{PROMPT_VERSION}.txt").read_text(encoding="utf-8")


def _format_example_block(template: str, index: int, entry, include_ratings: bool) -> str:
    ratings = ""
    if include_ratings and entry.ratings:
        sentences = ", ".join(entry.ratings.get("sentences", []))
        ratings = (
            f"Overall rating: {entry.ratings['overall']}\n"
            f"Title rating: {entry.ratings['title']}\n"
            f"Sentence ratings: {sentences}\n"
        )
    return template.format(
        index=index,
        p=f"{entry.p:.3f}",
        title=entry.masked_title,
        content=entry.masked_body,
        ratings=ratings,
    )


def build_system_prompt(
    examples,
    include_ratings: bool,
    mode: str,
    prompts_dir: Path | None = None,
) -> str:
    """Guideline template, optionally extended with retrieval examples in
    retrieval order. include_ratings=False drops every rating line and the
    rating guidelines (the exclude-ratings ablation)."""
    if mode not in ("basic", "rag"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "rag" and not examples:
        raise ValueError("rag mode requires at least one example")
    if len(examples) > MAX_EXAMPLES:
        raise ValueError(f"at most {MAX_EXAMPLES} examples allowed")

    prompts_dir = prompts_dir or default_prompts_dir()
    system = _load_template(prompts_dir, "system")
    rating_guidelines = (
        _load_template(prompts_dir, "rating_guidelines") if include_ratings else ""
    )
    examples_section = ""
    if mode == "rag":
        block_template = _load_template(prompts_dir, "example_block")
        blocks = [
            _format_example_block(block_template, i + 1, ex, include_ratings)
            for i, ex in enumerate(examples)
        ]
        examples_section = _load_template(prompts_dir, "examples_section").format(
            examples="\n".join(blocks)
        )
    return system.format(
        mask_tokens=", ".join(MASK_VOCABULARY),
        rating_guidelines=rating_guidelines,
        examples_section=examples_section,
    )


def build_user_prompt(request, report=None, lexicon=None) -> dict:
    """Structured payload: title, content, and explainer ratings when a
    report is given. Refuses to build when the text carries foreign
    bracket tokens or (when a lexicon is supplied) unmasked credentials."""
    title, content = request.masked_title, request.masked_body
    foreign = foreign_bracket_tokens(title) + foreign_bracket_tokens(content)
    if foreign:
        raise ValueError(f"payload contains tokens outside the mask vocabulary: {foreign}")
    if lexicon is not None:
        if mask_credentials(title, lexicon) != title or mask_credentials(content, lexicon) != content:
            raise ValueError("payload contains unmasked credential patterns; refusing to send")

    payload = {"title": title, "content": content}
    if report is not None:
        payload["ratings"] = {
            "overall": report.overall_rating,
            "title": report.title_rating,
            "sentences": [
                {"index": i, "rating": r}
                for i, r in enumerate(report.sentence_ratings)
            ],
        }
    return payload


# ---------------------------------------------------------------------------
# Providers

_FENCE_RE = re.compile(r"```[a-zA-Z]*\s*\n?(.*?)```", re.DOTALL)


def _fenced_payload(title: str, content: str) -> str:
    return "```json\n" + json.dumps({"title": title, "content": content}) + "\n```"


class EchoProvider:
    """Deterministic stub: returns the user's own title and content."""

    name = "stub-echo"

    def complete(self, bundle: PromptBundle) -> str:
        return _fenced_payload(bundle.user["title"], bundle.user["content"])

    def health(self) -> bool:
        return True


_EXAMPLE_BLOCK_RE = re.compile(
    r"### Example 1 .*?\nTitle: (?P<title>.*?)\nContent:\n(?P<content>.*?)\n"
    r"(?:Overall rating:|### End example 1)",
    re.DOTALL,
)


class TopExampleProvider:
    """Deterministic stub: returns the first retrieved example verbatim,
    echoing the input when the prompt carries no examples."""

    name = "stub-top-example"

    def complete(self, bundle: PromptBundle) -> str:
        match = _EXAMPLE_BLOCK_RE.search(bundle.system)
        if match is None:
            return _fenced_payload(bundle.user["title"], bundle.user["content"])
        return _fenced_payload(match.group("title"), match.group("content").rstrip("\n"))

    def health(self) -> bool:
        return True


class ScriptedProvider:
    """Stub that replays a fixed sequence of raw outputs (cycling)."""

    name = "stub-scripted"

    def __init__(self, outputs: list[str]):
        if not outputs:
            raise ValueError("need at least one scripted output")
        self.outputs = outputs
        self.calls = 0

    def complete(self, bundle: PromptBundle) -> str:
        out = self.outputs[self.calls % len(self.outputs)]
        self.calls += 1
        return out

    def health(self) -> bool:
        return True


class HttpCompletionProvider:
    """Remote provider speaking the completion HTTP contract:

    POST {base}/complete {"model": id, "system": text, "user": object,
    "temperature": t[, "seed": s]} -> {"text": raw}
    """

    def __init__(
        self,
        base_url: str,
        name: str = "http-completion",
        retries: int = 3,
        backoff: float = 0.25,
        max_in_flight: int = 4,
        transport: httpx.BaseTransport | None = None,
        sleeper=time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.name = name
        self._retries = retries
        self._backoff = backoff
        self._sleep = sleeper
        self._semaphore = threading.Semaphore(max_in_flight)
        self._client = httpx.Client(transport=transport, timeout=60.0)

    def complete(self, bundle: PromptBundle) -> str:
        payload = {
            "model": bundle.model_id,
            "system": bundle.system,
            "user": bundle.user,
            "temperature": bundle.temperature,
        }
        if bundle.seed is not None:
            payload["seed"] = bundle.seed
        last_error = None
        for attempt in range(self._retries):
            try:
                with self._semaphore:
                    resp = self._client.post(self.base_url + "/complete", json=payload)
                resp.raise_for_status()
                return resp.json()["text"]
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_error = exc
                if attempt < self._retries - 1:
                    self._sleep(self._backoff * (2**attempt))
        raise TransportFailure(f"completion failed after {self._retries} attempts: {last_error}", raw="")

    def health(self) -> bool:
        try:
            resp = self._client.get(self.base_url + "/health")
            return resp.status_code == 200
        except httpx.TransportError:
            return False


# ---------------------------------------------------------------------------
# Parsing and validation

_SALARY_DIGIT_RE = re.compile(r"\$\s*\d|\b\d+(?:[.,]\d+)?\s?k\b", re.IGNORECASE)
_YOE_DIGIT_RE = re.compile(r"\b\d+\+?\s*(?:years?|yrs?|yoe)\b", re.IGNORECASE)


def parse_revision(raw: str) -> tuple[str, str]:
    """Extract the single fenced JSON object {"title", "content"}.
    Leading/trailing prose is tolerated; anything else is a ParseFailure."""
    candidates = []
    for block in _FENCE_RE.findall(raw):
        try:
            obj = json.loads(block)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            candidates.append(obj)
    if not candidates:
        try:
            obj = json.loads(raw)
            if isinstance(obj, dict):
                candidates.append(obj)
        except json.JSONDecodeError:
            pass
    if len(candidates) != 1:
        raise ParseFailure(
            f"expected exactly one structured object, found {len(candidates)}", raw
        )
    obj = candidates[0]
    if "title" not in obj or "content" not in obj:
        raise ParseFailure("object missing 'title' or 'content'", raw)
    if not isinstance(obj["title"], str) or not isinstance(obj["content"], str):
        raise ParseFailure("'title' and 'content' must be strings", raw)
    return obj["title"], obj["content"]


def validate_revision(
    title: str, content: str, original_title: str, original_content: str, raw: str
) -> None:
    """Reject empty fields, foreign bracket tokens, and credential-shaped
    digits (salary / years-of-experience) absent from the original."""
    if not title.strip() or not content.strip():
        raise ValidationFailure("revision has an empty title or content", raw)
    foreign = foreign_bracket_tokens(title) + foreign_bracket_tokens(content)
    if foreign:
        raise ValidationFailure(
            f"revision contains tokens outside the mask vocabulary: {foreign}", raw
        )
    original = original_title + "\n" + original_content
    revised = title + "\n" + content
    for pattern, label in ((_SALARY_DIGIT_RE, "salary"), (_YOE_DIGIT_RE, "years-of-experience")):
        if pattern.search(revised) and not pattern.search(original):
            raise ValidationFailure(
                f"revision introduces a {label} figure the original lacked", raw
            )


def revise(
    request,
    provider,
    bundle: PromptBundle,
    validation_retries: int = 2,
) -> Revision:
    """Call the provider, parse, and validate; re-ask up to the retry
    budget on malformed or invalid output, then surface the typed failure
    carrying the raw text."""
    attempts = validation_retries + 1
    last_failure: RevisionError | None = None
    for attempt in range(attempts):
        started = time.monotonic()
        try:
            raw = provider.complete(bundle)
        except TransportFailure:
            raise
        latency = time.monotonic() - started
        if provider.name.startswith("stub-"):
            latency = 0.0
        try:
            title, content = parse_revision(raw)
            validate_revision(
                title, content, request.masked_title, request.masked_body, raw
            )
        except RevisionError as failure:
            last_failure = failure
            if attempt < attempts - 1:
                warnings.warn(f"revision attempt {attempt + 1} rejected: {failure.reason}")
            continue
        return Revision(title=title, content=content, latency=latency)
    assert last_failure is not None
    raise last_failure
