"""Semantic attribute flags and linguistic properties for the featurized
encoder.

Flags are binary pattern-match indicators defined in a versioned schema
file (9 platform attributes + 12 attributes motivated by the request
literature, 21 flags in all). Numerics are lexical diversity, word count,
Flesch reading ease, and a dictionary-based spelling-error count.
"""

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .text import (
    combine_title_body,
    count_sentences,
    count_syllables,
    is_mask_token,
    tokenize,
)


@dataclass(frozen=True)
class AttributeDef:
    name: str
    patterns: tuple[str, ...]
    source: str  # "platform" or "literature"


class FeatureSchema:
    """Versioned set of attribute definitions with compiled patterns."""

    def __init__(self, version: str, attributes: list[AttributeDef]):
        self.version = version
        self.attributes = attributes
        self._compiled = [
            (a.name, [re.compile(p, re.IGNORECASE) for p in a.patterns])
            for a in attributes
        ]

    @property
    def attribute_names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def compiled(self):
        return self._compiled


def load_schema(path: str | Path) -> FeatureSchema:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    attrs = [
        AttributeDef(name=a["name"], patterns=tuple(a["patterns"]), source=a["source"])
        for a in raw["attributes"]
    ]
    return FeatureSchema(version=raw["version"], attributes=attrs)


def default_schema_path() -> Path:
    return Path(__file__).parent / "data" / "feature_schema.json"


def load_dictionary(path: str | Path) -> frozenset[str]:
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip().lower()
        if word:
            words.add(word)
    return frozenset(words)


def default_dictionary_path() -> Path:
    return Path(__file__).parent / "data" / "dictionary.txt"


@dataclass(frozen=True)
class LinguisticStats:
    type_token_ratio: float
    word_count: int
    readability_score: float
    spelling_errors: int


@dataclass(frozen=True)
class FeatureVector:
    flags: dict[str, int]
    type_token_ratio: float
    word_count: int
    readability_score: float
    spelling_errors: int

    def as_array(self) -> np.ndarray:
        return np.array(
            list(self.flags.values())
            + [
                self.type_token_ratio,
                float(self.word_count),
                self.readability_score,
                float(self.spelling_errors),
            ],
            dtype=float,
        )


def extract_semantic(text: str, schema: FeatureSchema) -> dict[str, int]:
    """One binary flag per schema attribute: 1 iff any pattern matches."""
    stripped = text.strip()
    flags = {}
    for name, patterns in schema.compiled():
        flags[name] = int(any(p.search(stripped) for p in patterns))
    return flags


def linguistic_properties(text: str, dictionary: frozenset[str]) -> LinguisticStats:
    """Lexical diversity, word count, Flesch reading ease, and spelling
    errors (tokens missing from the dictionary, mask tokens excluded).

    Empty text conventions: type-token ratio 1.0, everything else 0.
    """
    tokens = tokenize(text)
    if not tokens:
        return LinguisticStats(1.0, 0, 0.0, 0)

    words = len(tokens)
    distinct = len({t.lower() for t in tokens})
    sentences = count_sentences(text)
    syllables = sum(count_syllables(t) for t in tokens)
    readability = 206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words)
    errors = sum(
        1
        for t in tokens
        if not is_mask_token(t) and t.lower() not in dictionary
    )
    return LinguisticStats(distinct / words, words, readability, errors)


def featurize(
    request, schema: FeatureSchema, dictionary: frozenset[str]
) -> FeatureVector:
    """Flags over title+body plus linguistic numerics, in stable schema
    order. Pure: identical inputs give identical vectors."""
    text = combine_title_body(request.masked_title, request.masked_body)
    flags = extract_semantic(text, schema)
    stats = linguistic_properties(text, dictionary)
    return FeatureVector(
        flags=flags,
        type_token_ratio=stats.type_token_ratio,
        word_count=stats.word_count,
        readability_score=stats.readability_score,
        spelling_errors=stats.spelling_errors,
    )
