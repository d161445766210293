"""Corpus ingestion: identify referral requests and offers, mask
credentials, assemble the labeled dataset, and split it by date.

Posts and comments arrive as JSONL files. A request is a post that uses
both a generic referral term and an explicit request phrase; its label is
whether any comment on it matches an offer phrase (and no exclusion).
Matching is case-insensitive substring matching after whitespace
normalization. Lexicons are versioned configuration, not code.
"""

import datetime as dt
import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .text import (
    BRACKET_TOKEN_RE,
    MASK_TOKEN_RE,
    MASK_VOCABULARY,
    normalize_ws,
)


@dataclass(frozen=True)
class Post:
    id: str
    date: dt.date
    title: str
    body: str
    author: str
    affiliation: str | None = None
    views: int = 0
    likes: int = 0
    comment_count: int = 0

    def __post_init__(self):
        if not self.title:
            raise ValueError(f"post {self.id!r} has an empty title")
        for name in ("views", "likes", "comment_count"):
            if getattr(self, name) < 0:
                raise ValueError(f"post {self.id!r}: {name} must be >= 0")


@dataclass(frozen=True)
class Comment:
    id: str
    post_id: str
    body: str
    author: str
    affiliation: str | None = None
    likes: int = 0

    def __post_init__(self):
        if self.likes < 0:
            raise ValueError(f"comment {self.id!r}: likes must be >= 0")


@dataclass(frozen=True)
class ReferralRequest:
    id: str
    date: dt.date
    masked_title: str
    masked_body: str
    label: bool


@dataclass(frozen=True)
class DatasetSplit:
    threshold_date: dt.date
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    train_base_rate: float


@dataclass
class LexiconConfig:
    """Phrase lists and masking rules, loaded from a versioned JSON file."""

    request_terms: list[str]
    request_phrases: list[str]
    offer_phrases: list[str]
    offer_exclusions: list[str]
    mask_rules: list[tuple[str, str]]
    version: str = "v1"
    _compiled: list[tuple[re.Pattern, str]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        for pattern, token in self.mask_rules:
            if token not in MASK_VOCABULARY:
                raise ValueError(f"mask rule token {token!r} outside the mask vocabulary")
            self._compiled.append((re.compile(pattern, re.IGNORECASE), token))

    @property
    def compiled_rules(self) -> list[tuple[re.Pattern, str]]:
        return self._compiled


def load_lexicon(path: str | Path) -> LexiconConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return LexiconConfig(
        request_terms=raw["request_terms"],
        request_phrases=raw["request_phrases"],
        offer_phrases=raw["offer_phrases"],
        offer_exclusions=raw["offer_exclusions"],
        mask_rules=[(p, t) for p, t in raw["mask_rules"]],
        version=raw.get("version", "v1"),
    )


def default_lexicon_path() -> Path:
    return Path(__file__).parent / "data" / "lexicon.json"


def _norm(text: str) -> str:
    return normalize_ws(text).lower()


def identify_request(post: Post, lexicon: LexiconConfig) -> bool:
    """True iff the post's title-or-body carries a generic referral term
    AND an explicit request phrase."""
    text = _norm(post.title) + " " + _norm(post.body)
    has_term = any(term.lower() in text for term in lexicon.request_terms)
    has_phrase = any(phrase.lower() in text for phrase in lexicon.request_phrases)
    return has_term and has_phrase


def identify_offer(comment: Comment, lexicon: LexiconConfig) -> bool:
    """True iff an offer phrase matches and no exclusion phrase matches.

    Exclusions always win: comments that resemble requests ("Can I also
    DM...") are never offers no matter what else they contain.
    """
    text = _norm(comment.body)
    if any(excl.lower() in text for excl in lexicon.offer_exclusions):
        return False
    return any(phrase.lower() in text for phrase in lexicon.offer_phrases)


def _apply_rules_once(text: str, lexicon: LexiconConfig) -> str:
    # Apply each rule only to the segments between existing mask tokens,
    # so replacement text is never re-matched by later rules.
    out = text
    for pattern, token in lexicon.compiled_rules:
        parts = MASK_TOKEN_RE.split(out)
        tokens = MASK_TOKEN_RE.findall(out)
        rebuilt = []
        for i, part in enumerate(parts):
            rebuilt.append(pattern.sub(token, part))
            if i < len(tokens):
                rebuilt.append(tokens[i])
        out = "".join(rebuilt)
    # Neutralize bracketed tokens outside the vocabulary by stripping
    # their brackets; masked text must only ever contain known tokens.
    out = BRACKET_TOKEN_RE.sub(
        lambda m: m.group(0) if m.group(0) in MASK_VOCABULARY else m.group(1),
        out,
    )
    return out


def mask_credentials(text: str, lexicon: LexiconConfig, max_passes: int = 4) -> str:
    """Replace every credential match with its mask token.

    The rule pipeline runs to a fixed point, which makes masking
    idempotent by construction: masking already-masked text is a no-op.
    """
    out = text
    for _ in range(max_passes):
        nxt = _apply_rules_once(out, lexicon)
        if nxt == out:
            return out
        out = nxt
    return out


def label_and_assemble(
    posts: list[Post],
    comments: list[Comment],
    lexicon: LexiconConfig,
) -> list[ReferralRequest]:
    """One ReferralRequest per post passing identify_request, labeled by
    whether any of its comments is an offer. Dangling comments are skipped
    with a warning."""
    post_ids = {p.id for p in posts}
    by_post: dict[str, list[Comment]] = {}
    for c in comments:
        if c.post_id not in post_ids:
            warnings.warn(f"comment {c.id!r} references unknown post {c.post_id!r}; skipped")
            continue
        by_post.setdefault(c.post_id, []).append(c)

    requests = []
    for post in posts:
        if not identify_request(post, lexicon):
            continue
        label = any(identify_offer(c, lexicon) for c in by_post.get(post.id, []))
        requests.append(
            ReferralRequest(
                id=post.id,
                date=post.date,
                masked_title=mask_credentials(post.title, lexicon),
                masked_body=mask_credentials(post.body, lexicon),
                label=label,
            )
        )
    return requests


def split_by_date(
    requests: list[ReferralRequest], threshold_date: dt.date
) -> DatasetSplit:
    """Partition requests into train (date < threshold) and test (date >=
    threshold); errors if either side is empty. Reports the train base
    rate (share of positive labels)."""
    train = [r for r in requests if r.date < threshold_date]
    test = [r for r in requests if r.date >= threshold_date]
    if not train:
        raise ValueError(f"no requests before threshold {threshold_date}")
    if not test:
        raise ValueError(f"no requests on or after threshold {threshold_date}")
    base_rate = sum(r.label for r in train) / len(train)
    return DatasetSplit(
        threshold_date=threshold_date,
        train_ids=tuple(sorted(r.id for r in train)),
        test_ids=tuple(sorted(r.id for r in test)),
        train_base_rate=base_rate,
    )


# ---------------------------------------------------------------------------
# JSONL / JSON artifacts


def _parse_date(value: str) -> dt.date:
    return dt.date.fromisoformat(value)


def read_posts_jsonl(path: str | Path) -> list[Post]:
    posts = []
    seen = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        if raw["id"] in seen:
            raise ValueError(f"duplicate post id {raw['id']!r}")
        seen.add(raw["id"])
        posts.append(
            Post(
                id=str(raw["id"]),
                date=_parse_date(raw["date"]),
                title=raw["title"],
                body=raw.get("body", ""),
                author=str(raw.get("author", "")),
                affiliation=raw.get("affiliation"),
                views=int(raw.get("views", 0)),
                likes=int(raw.get("likes", 0)),
                comment_count=int(raw.get("comment_count", 0)),
            )
        )
    return posts


def read_comments_jsonl(path: str | Path) -> list[Comment]:
    comments = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        comments.append(
            Comment(
                id=str(raw["id"]),
                post_id=str(raw["post_id"]),
                body=raw.get("body", ""),
                author=str(raw.get("author", "")),
                affiliation=raw.get("affiliation"),
                likes=int(raw.get("likes", 0)),
            )
        )
    return comments


def write_requests_jsonl(requests: list[ReferralRequest], path: str | Path) -> None:
    lines = []
    for r in requests:
        lines.append(
            json.dumps(
                {
                    "id": r.id,
                    "date": r.date.isoformat(),
                    "masked_title": r.masked_title,
                    "masked_body": r.masked_body,
                    "label": r.label,
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_requests_jsonl(path: str | Path) -> list[ReferralRequest]:
    requests = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        requests.append(
            ReferralRequest(
                id=str(raw["id"]),
                date=_parse_date(raw["date"]),
                masked_title=raw["masked_title"],
                masked_body=raw["masked_body"],
                label=bool(raw["label"]),
            )
        )
    return requests


def write_split_json(split: DatasetSplit, path: str | Path) -> None:
    payload = {
        "threshold_date": split.threshold_date.isoformat(),
        "train_ids": list(split.train_ids),
        "test_ids": list(split.test_ids),
        "train_base_rate": split.train_base_rate,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_split_json(path: str | Path) -> DatasetSplit:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return DatasetSplit(
        threshold_date=_parse_date(raw["threshold_date"]),
        train_ids=tuple(raw["train_ids"]),
        test_ids=tuple(raw["test_ids"]),
        train_base_rate=float(raw["train_base_rate"]),
    )
