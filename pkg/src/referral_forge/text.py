"""Shared text primitives: whitespace normalization, mask-token aware
tokenization, sentence splitting, and the closed mask vocabulary.

Every module that touches request text (corpus masking, feature flags,
TF-IDF, the hashing embedder, sentence attribution) goes through these
helpers so token offsets line up across the pipeline.
"""

import re

# Closed vocabulary of credential mask tokens. Anything bracketed that is
# not in this set is treated as foreign and must never survive masking or
# reach a revision.
MASK_VOCABULARY = (
    "[ROLE]",
    "[LOCATION]",
    "[FIRM_NAME]",
    "[SALARY]",
    "[YOE]",
    "[SENIORITY]",
)

MASK_TOKEN_RE = re.compile(
    "|".join(re.escape(tok) for tok in MASK_VOCABULARY)
)

# Any bracketed word-like sequence, used to detect foreign tokens.
BRACKET_TOKEN_RE = re.compile(r"\[([A-Za-z_][A-Za-z0-9_\- ]*)\]")

# Tokens are maximal alphanumeric runs (plus apostrophes inside words),
# with mask tokens kept atomic.
_WORD_RE = re.compile(r"[A-Za-z0-9]+(?:'[A-Za-z]+)?")
_TOKEN_RE = re.compile(MASK_TOKEN_RE.pattern + "|" + _WORD_RE.pattern)

_SENTENCE_BREAK_RE = re.compile(r"[.!?\n]+")


def normalize_ws(text: str) -> str:
    """Collapse all whitespace runs to single spaces and strip the ends."""
    return re.sub(r"\s+", " ", text).strip()


def is_mask_token(token: str) -> bool:
    return token in MASK_VOCABULARY


def foreign_bracket_tokens(text: str) -> list[str]:
    """Bracketed tokens in `text` that are outside the mask vocabulary."""
    found = []
    for match in BRACKET_TOKEN_RE.finditer(text):
        token = match.group(0)
        if token not in MASK_VOCABULARY:
            found.append(token)
    return found


def tokenize(text: str) -> list[str]:
    """Split text into word tokens, keeping mask tokens atomic.

    Non-alphanumeric characters separate tokens; mask tokens like [ROLE]
    come through as single tokens with brackets intact.
    """
    return _TOKEN_RE.findall(text)


def split_sentences(text: str) -> list[str]:
    """Split body text into sentence chunks at . ! ? and newlines.

    Mask tokens contain no terminators, so they are never split. Chunks
    that are empty after stripping are dropped.
    """
    chunks = _SENTENCE_BREAK_RE.split(text)
    return [c.strip() for c in chunks if c.strip()]


def count_sentences(text: str) -> int:
    """Number of sentence chunks, minimum 1 for nonempty text."""
    if not text.strip():
        return 0
    return max(1, len(split_sentences(text)))


def count_syllables(word: str) -> int:
    """Vowel-group syllable heuristic.

    Consecutive vowels count as one syllable, a silent trailing 'e' is
    dropped, and every word has at least one syllable. Mask tokens are
    counted on their inner text with the same rule.
    """
    w = word.strip("[]").lower()
    w = re.sub(r"[^a-z]", "", w)
    if not w:
        return 1
    if w.endswith("e") and len(w) > 2 and w[-2] not in "aeiou":
        w = w[:-1]
    groups = re.findall(r"[aeiouy]+", w)
    return max(1, len(groups))


def combine_title_body(title: str, body: str) -> str:
    """Canonical text fed to encoders: title and body joined by one newline."""
    return title + "\n" + body
