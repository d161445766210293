"""TF-IDF encoder over stemmed, stopword-filtered unigrams and bigrams.

The vocabulary is fit on training text only and persisted as JSON. Weights
are term count times idf, L2-normalized, with idf(t) = ln((1+N)/(1+df(t)))
+ 1. Root-form reduction uses a rule-based suffix stemmer (documented in
`stem`) rather than a POS-aware lemmatizer.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .text import is_mask_token, tokenize

STEMMER_ID = "suffix-v1"

# Ordered suffix rules; the first applicable rule whose stem keeps at
# least 3 characters wins.
_SUFFIX_RULES = [
    ("sses", "ss"),
    ("ies", "i"),
    ("tional", "tion"),
    ("ization", "ize"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("iveness", "ive"),
    ("ingly", ""),
    ("edly", ""),
    ("ing", ""),
    ("ed", ""),
    ("ly", ""),
    ("ment", ""),
    ("ness", ""),
    ("ers", "er"),
    ("s", ""),
]


def stem(token: str) -> str:
    """Rule-based suffix stemmer. Mask tokens and short words pass
    through unchanged."""
    if is_mask_token(token) or len(token) <= 3:
        return token
    for suffix, replacement in _SUFFIX_RULES:
        if token.endswith(suffix):
            candidate = token[: -len(suffix)] + replacement
            if len(candidate) >= 3:
                return candidate
    return token


def load_stopwords(path: str | Path) -> frozenset[str]:
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        w = line.strip().lower()
        if w:
            words.add(w)
    return frozenset(words)


def default_stopwords_path() -> Path:
    return Path(__file__).parent / "data" / "stopwords.txt"


@dataclass
class TfidfConfig:
    stopwords: frozenset[str]
    stopword_id: str = "default-v1"
    use_stemmer: bool = True
    min_df: int = 1


@dataclass(frozen=True)
class SparseVector:
    indices: tuple[int, ...]
    weights: tuple[float, ...]

    def to_dense(self, size: int) -> np.ndarray:
        dense = np.zeros(size)
        dense[list(self.indices)] = self.weights
        return dense

    def norm(self) -> float:
        return math.sqrt(sum(w * w for w in self.weights))


@dataclass
class TfidfVocabulary:
    token_to_index: dict[str, int]
    idf: np.ndarray
    stopword_id: str
    stemmer_id: str
    min_df: int
    n_docs: int

    @property
    def size(self) -> int:
        return len(self.token_to_index)


def _terms(text: str, config: TfidfConfig) -> list[str]:
    tokens = []
    for tok in tokenize(text):
        word = tok if is_mask_token(tok) else tok.lower()
        if word in config.stopwords:
            continue
        tokens.append(stem(word) if config.use_stemmer else word)
    bigrams = [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    return tokens + bigrams


def fit_tfidf(texts: list[str], config: TfidfConfig) -> TfidfVocabulary:
    """Fit the vocabulary and idf weights on a training corpus."""
    if not texts:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    n_docs = len(texts)
    df: dict[str, int] = {}
    for text in texts:
        for term in set(_terms(text, config)):
            df[term] = df.get(term, 0) + 1

    vocab_terms = sorted(t for t, d in df.items() if d >= config.min_df)
    token_to_index = {t: i for i, t in enumerate(vocab_terms)}
    idf = np.array(
        [math.log((1 + n_docs) / (1 + df[t])) + 1.0 for t in vocab_terms]
    )
    return TfidfVocabulary(
        token_to_index=token_to_index,
        idf=idf,
        stopword_id=config.stopword_id,
        stemmer_id=STEMMER_ID if config.use_stemmer else "none",
        min_df=config.min_df,
        n_docs=n_docs,
    )


def transform_tfidf(
    text: str, vocab: TfidfVocabulary, config: TfidfConfig
) -> SparseVector:
    """Count terms, scale by idf, L2-normalize. Out-of-vocabulary terms
    are dropped; a text with no in-vocabulary terms maps to the empty
    vector."""
    counts: dict[int, int] = {}
    for term in _terms(text, config):
        idx = vocab.token_to_index.get(term)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return SparseVector((), ())

    indices = sorted(counts)
    weights = np.array([counts[i] * vocab.idf[i] for i in indices])
    weights = weights / np.linalg.norm(weights)
    return SparseVector(tuple(indices), tuple(float(w) for w in weights))


def transform_dense(
    text: str, vocab: TfidfVocabulary, config: TfidfConfig
) -> np.ndarray:
    return transform_tfidf(text, vocab, config).to_dense(vocab.size)


def save_vocab(vocab: TfidfVocabulary, path: str | Path) -> None:
    by_index = sorted(vocab.token_to_index.items(), key=lambda kv: kv[1])
    payload = {
        "tokens": [t for t, _ in by_index],
        "idf": [float(v) for v in vocab.idf],
        "stopword_id": vocab.stopword_id,
        "stemmer_id": vocab.stemmer_id,
        "min_df": vocab.min_df,
        "n_docs": vocab.n_docs,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> TfidfVocabulary:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return TfidfVocabulary(
        token_to_index={t: i for i, t in enumerate(raw["tokens"])},
        idf=np.array(raw["idf"]),
        stopword_id=raw["stopword_id"],
        stemmer_id=raw["stemmer_id"],
        min_df=int(raw["min_df"]),
        n_docs=int(raw["n_docs"]),
    )
